"""Secure iterative training: retrain a fresh attacker, step the graph.

Every ``mu`` learner epochs (starting at epoch 0) a surrogate attacker is
initialized from scratch and trained to convergence on the current learned
graph; the learner then takes one Adam step against it. Nothing of the
previous attacker survives a retrain.
"""
from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import graph_learner as gl
from . import surrogate_attack as sa
from .graph_core import DataSplits, Graph, node_features
from .numkit import AdamState, adam_step
from .seeding import child_seed

PROTOCOLS = ("sitp", "adv")


@dataclass
class TrainConfig:
    alpha: float = 0.005
    k: float = 1.0
    mu: int = 50
    n1: int = 500
    n2: int = 500
    eta1: float = 0.01
    eta2: float = 0.5
    head: str = "cosine"
    mode: str = "sparse"
    seed: int = 0
    hidden: tuple = (128, 64)
    eval_every: int | None = None
    protocol: str = "sitp"

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.mu < 1:
            raise ValueError("mu must be >= 1")
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("n1 and n2 must be >= 1")
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}")
        if self.head not in sa.HEADS:
            raise ValueError(f"unknown head {self.head!r}")

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class EpochRecord:
    epoch: int
    learner_loss: float
    privacy_loss: float
    utility_loss: float
    retrained: bool
    wall_time: float
    attack_auc: float | None = None
    linkpred_auc: float | None = None


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)

    def losses(self) -> np.ndarray:
        return np.array([r.learner_loss for r in self.records])

    def retrained(self) -> np.ndarray:
        return np.array([r.retrained for r in self.records])

    def to_csv(self, path) -> None:
        cols = ["epoch", "learner_loss", "privacy_loss", "utility_loss", "retrained",
                "wall_time", "attack_auc", "linkpred_auc"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in self.records:
                row = asdict(r)
                w.writerow(["" if row[c] is None else
                            (int(row[c]) if isinstance(row[c], bool) else row[c]) for c in cols])


def retrain_due(epoch: int, mu: int) -> bool:
    if mu < 1:
        raise ValueError("mu must be >= 1")
    return epoch % mu == 0


def _attack_cfg(cfg: TrainConfig, retrain_idx: int) -> sa.AttackTrainConfig:
    return sa.AttackTrainConfig(epochs=cfg.n1, lr=cfg.eta1, head=cfg.head, hidden=cfg.hidden,
                                seed=child_seed(cfg.seed, "sitp_attack", retrain_idx))


def _periodic_eval(g, splits, p, cfg, epoch, x):
    from .attacks import auc
    from .utility_eval import linkpred_eval

    snap = gl.discretize(gl.materialize_pairs(p), child_seed(cfg.seed, "eval_snapshot", epoch), g)
    if snap.graph.num_edges == 0:
        return 0.5, 0.5
    acfg = sa.AttackTrainConfig(epochs=cfg.n1, lr=cfg.eta1, head="cosine", hidden=cfg.hidden,
                                seed=child_seed(cfg.seed, "eval_attack", epoch))
    m = sa.train_attack(snap.graph, x, acfg)
    z = sa.encode(m, snap.graph, x)
    a = auc(sa.predict_pairs(m, z, splits.sensitive), sa.predict_pairs(m, z, splits.eval_negatives))
    lp = linkpred_eval(snap.graph, splits, acfg) if len(splits.util_test_pos) else None
    return a, lp


def run_sitp(g: Graph, splits: DataSplits, cfg: TrainConfig | None = None, features=None):
    """Learn and release a protected graph.

    Returns ``(PublishedGraph, TrainTrace)``. ``features`` overrides the
    encoder input; by default real features are used, or identity / degree
    buckets for featureless graphs.
    """
    cfg = cfg or TrainConfig()
    if len(splits.sensitive) < 1:
        raise ValueError("need at least one sensitive pair")
    x = node_features(g) if features is None else features
    p = gl.init_learner(g, splits, cfg.mode, cfg.k, child_seed(cfg.seed, "learner_init"))
    opt = AdamState.like(p.theta, lr=cfg.eta2)
    trace = TrainTrace()
    model = None
    adv_opt = None
    retrains = 0
    t0 = time.perf_counter()
    for epoch in range(cfg.n2):
        wp = gl.materialize_pairs(p)
        retrained = False
        if cfg.protocol == "sitp":
            if retrain_due(epoch, cfg.mu):
                model = sa.train_attack(wp, x, _attack_cfg(cfg, retrains))
                retrains += 1
                retrained = True
        else:
            model, adv_opt = _adv_attack_step(model, adv_opt, wp, x, cfg, epoch)
            retrained = epoch == 0
        grad, parts = gl.learner_grad(model, p, x, splits.sensitive, cfg.alpha)
        if not np.isfinite(parts.total):
            raise FloatingPointError(f"non-finite learner loss at epoch {epoch}")
        rec = EpochRecord(epoch, parts.total, parts.privacy, parts.utility, retrained,
                          time.perf_counter() - t0)
        if cfg.eval_every and epoch % cfg.eval_every == 0:
            rec.attack_auc, rec.linkpred_auc = _periodic_eval(g, splits, p, cfg, epoch, x)
        trace.records.append(rec)
        p.theta, opt = adam_step(p.theta, grad, opt)

    prov = {"config_hash": cfg.config_hash(), "seed": cfg.seed, "alpha": cfg.alpha, "k": cfg.k,
            "mu": cfg.mu, "epochs": cfg.n2, "method": "ppgsl", "protocol": cfg.protocol}
    published = gl.discretize(gl.materialize_pairs(p), child_seed(cfg.seed, "release"), g, prov)
    published.learned = p
    return published, trace


def _adv_attack_step(model, opt, wp, x, cfg, epoch):
    """Alternating baseline: one attacker step per learner step, never reinitialized."""
    from .graph_core import sample_pairs_excluding
    from .numkit import Adam
    from .seeding import stream

    if model is None:
        model = sa.init_model(x.shape[1], cfg.hidden, cfg.head,
                              stream(child_seed(cfg.seed, "sitp_attack", 0), "attack_init"))
        opt = Adam(model.params(), lr=cfg.eta1)
    pos, tgt = wp.edges()
    rng = stream(cfg.seed, "adv_negatives", epoch)
    neg = sample_pairs_excluding(wp.n, len(pos), wp.edge_keys(), rng)
    spec = sa.LossSpec.attack(pos, tgt, neg)
    loss, grads = sa.loss_grad_wrt_params(model, wp, x, spec)
    model.loss_history.append(loss)
    opt.step(grads)
    return model, opt


@dataclass
class ConvergenceSummary:
    first_decile_mean: float
    last_decile_mean: float
    jumps: int
    jump_epochs: list
    off_boundary_jumps: int
    converged: bool


JUMP_SCALE = 10.0


def convergence_report(trace: TrainTrace, jump_tol=None) -> ConvergenceSummary:
    """Decile means, upward loss jumps and a converged / not-converged verdict.

    A jump is an epoch-to-epoch increase larger than ``jump_tol``. By default
    the threshold is ``JUMP_SCALE`` times the median absolute step of the
    trace, a robust estimate of the ordinary step-to-step noise. Jumps are
    expected only at retrain epochs.
    """
    if not trace.records:
        raise ValueError("empty trace")
    loss = trace.losses()
    n = len(loss)
    d = max(1, n // 10)
    first, last = float(loss[:d].mean()), float(loss[-d:].mean())
    inc = np.diff(loss)
    if jump_tol is None:
        jump_tol = JUMP_SCALE * float(np.median(np.abs(inc))) if inc.size else 0.0
    jump_at = np.flatnonzero(inc > jump_tol) + 1
    flags = trace.retrained()
    off = int(np.sum(~flags[jump_at])) if jump_at.size else 0
    return ConvergenceSummary(first, last, int(jump_at.size), jump_at.tolist(), off,
                              bool(last < first))

"""Sensitive-link inference attacks and their ROC-AUC scoring."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.stats import rankdata

from . import surrogate_attack as sa
from .graph_core import DataSplits, Graph, node_features
from .seeding import child_seed

log = logging.getLogger(__name__)

HEURISTICS = ("cn", "aa", "ra")
EMBED_METHODS = {"embed_cos": "cosine", "embed_ip": "inner_product", "embed_mlp": "mlp"}
SUITE = HEURISTICS + tuple(EMBED_METHODS)


@dataclass
class AttackResult:
    method: str
    pos_scores: np.ndarray
    neg_scores: np.ndarray
    auc: float
    seed: int | None = None

    def to_dict(self, bins=20) -> dict:
        both = np.concatenate([self.pos_scores, self.neg_scores])
        lo, hi = float(both.min()), float(both.max())
        if hi <= lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, bins + 1)
        return {
            "method": self.method,
            "auc": self.auc,
            "seed": self.seed,
            "histogram": {
                "bin_edges": edges.tolist(),
                "positives": np.histogram(self.pos_scores, edges)[0].tolist(),
                "negatives": np.histogram(self.neg_scores, edges)[0].tolist(),
            },
        }


def _graph(g):
    return g.graph if hasattr(g, "graph") else g


def auc(pos_scores, neg_scores) -> float:
    """Mann-Whitney AUC: P(pos > neg) + 0.5 P(pos == neg).

    Computed from the integer statistic ``2U`` and always dividing the
    smaller tail, so ``auc(p, n) + auc(n, p) == 1`` holds exactly in
    floating point.
    """
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if pos.size == 0 or neg.size == 0:
        raise ValueError("auc needs non-empty positive and negative score lists")
    ranks = rankdata(np.concatenate([pos, neg]))  # average ranks: multiples of 0.5
    n1, n2 = pos.size, neg.size
    two_u = int(round(2.0 * ranks[:n1].sum())) - n1 * (n1 + 1)
    denom = 2 * n1 * n2
    if 2 * two_u <= denom:
        return two_u / denom
    return 1.0 - (denom - two_u) / denom


# ---------------------------------------------------------------- heuristics


def _binary(g: Graph) -> sp.csr_matrix:
    b = (g.adjacency > 0).astype(np.float64).tocsr()
    b.sort_indices()
    return b


def heuristic_scores(g, pairs, method: str) -> np.ndarray:
    """CN / AA / RA for many pairs at once (any positive weight is an edge)."""
    g = _graph(g)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return np.zeros(0)
    b = _binary(g)
    common = b[pairs[:, 0]].multiply(b[pairs[:, 1]]).tocsr()
    deg = np.asarray(b.sum(axis=1)).ravel()
    if method == "cn":
        w = np.ones(g.n)
    elif method == "aa":
        # a common neighbour has degree >= 2, so log(deg) > 0 wherever it is used
        w = np.where(deg > 1, 1.0 / np.log(np.maximum(deg, 2)), 0.0)
    elif method == "ra":
        w = np.where(deg > 0, 1.0 / np.maximum(deg, 1), 0.0)
    else:
        raise ValueError(f"unknown heuristic {method!r}")
    return np.asarray(common @ w).ravel()


def cn_score(g, pair) -> float:
    return float(heuristic_scores(g, [pair], "cn")[0])


def aa_score(g, pair) -> float:
    return float(heuristic_scores(g, [pair], "aa")[0])


def ra_score(g, pair) -> float:
    return float(heuristic_scores(g, [pair], "ra")[0])


def heuristic_attack(g, method, pairs_pos, pairs_neg) -> AttackResult:
    pos = heuristic_scores(g, pairs_pos, method)
    neg = heuristic_scores(g, pairs_neg, method)
    return AttackResult(method, pos, neg, auc(pos, neg))


# ---------------------------------------------------------------- embedding attack


def embedding_attack(g, cfg: sa.AttackTrainConfig, pairs_pos, pairs_neg,
                     method: str | None = None) -> AttackResult:
    """Train a fresh GCN attacker on the published graph alone, then score pairs.

    An edgeless graph leaves nothing to train on; every pair then gets the
    uninformative score 0.5.
    """
    g = _graph(g)
    name = method or next(k for k, v in EMBED_METHODS.items() if v == cfg.head)
    if g.num_edges == 0:
        log.warning("%s: published graph has no edges, scoring every pair 0.5", name)
        pos, neg = np.full(len(pairs_pos), 0.5), np.full(len(pairs_neg), 0.5)
    else:
        x = node_features(g)
        model = sa.train_attack(g, x, cfg)
        z = sa.encode(model, g, x)
        pos = sa.predict_pairs(model, z, pairs_pos)
        neg = sa.predict_pairs(model, z, pairs_neg)
    return AttackResult(name, pos, neg, auc(pos, neg), cfg.seed)


def run_attack_suite(g, splits: DataSplits, cfg: sa.AttackTrainConfig | None = None,
                     methods=SUITE) -> list[AttackResult]:
    """Every attack in ``methods`` against the sensitive pairs vs evaluation negatives.

    Each embedding method trains with its own substream of ``cfg.seed``.
    """
    cfg = cfg or sa.AttackTrainConfig()
    out = []
    for m in methods:
        if m in HEURISTICS:
            r = heuristic_attack(g, m, splits.sensitive, splits.eval_negatives)
            r.seed = cfg.seed
        elif m in EMBED_METHODS:
            mcfg = sa.AttackTrainConfig(epochs=cfg.epochs, lr=cfg.lr, hidden=cfg.hidden,
                                        samples_per_epoch=cfg.samples_per_epoch,
                                        head=EMBED_METHODS[m],
                                        seed=child_seed(cfg.seed, "attacker", m))
            r = embedding_attack(g, mcfg, splits.sensitive, splits.eval_negatives, m)
        else:
            raise ValueError(f"unknown attack {m!r}")
        out.append(r)
    return out


def suite_report(results, seed=None, run_id=None) -> str:
    doc = {"seed": seed, "run_id": run_id, "attacks": [r.to_dict() for r in results]}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"

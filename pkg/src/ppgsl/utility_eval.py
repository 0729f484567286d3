"""Downstream utility of a published graph: link prediction, node classification, distortion."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.metrics import f1_score

from . import surrogate_attack as sa
from .attacks import auc
from .graph_core import DataSplits, Graph, as_weighted_pairs, node_features
from .numkit import Adam
from .seeding import child_seed, stream

log = logging.getLogger(__name__)


@dataclass
class UtilityReport:
    linkpred_auc: float | None = None
    nodeclass_f1_micro: float | None = None
    nodeclass_f1_macro: float | None = None
    distortion: float | None = None
    deleted: int | None = None
    added: int | None = None

    def to_dict(self):
        return asdict(self)


def _graph(g):
    return g.graph if hasattr(g, "graph") else g


def linkpred_eval(published, splits: DataSplits, cfg: sa.AttackTrainConfig | None = None) -> float:
    """AUC of held-out test links vs test non-links, from an encoder trained on ``published``."""
    g = _graph(published)
    if len(splits.util_test_pos) == 0 or len(splits.util_test_neg) == 0:
        raise ValueError("link-prediction test sets are empty")
    cfg = cfg or sa.AttackTrainConfig()
    if g.num_edges == 0:
        return 0.5
    lcfg = sa.AttackTrainConfig(epochs=cfg.epochs, lr=cfg.lr, head=cfg.head, hidden=cfg.hidden,
                                samples_per_epoch=cfg.samples_per_epoch,
                                seed=child_seed(cfg.seed, "linkpred"))
    x = node_features(g)
    model = sa.train_attack(g, x, lcfg)
    z = sa.encode(model, g, x)
    return auc(sa.predict_pairs(model, z, splits.util_test_pos),
               sa.predict_pairs(model, z, splits.util_test_neg))


def _softmax(logits):
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def nodeclass_eval(published, splits: DataSplits, epochs=200, lr=0.01, hidden=64,
                   weight_decay=5e-4, seed=0):
    """Semi-supervised two-layer GCN; returns ``(micro_f1, macro_f1)`` on test nodes."""
    g = _graph(published)
    if g.labels is None:
        raise ValueError("node classification needs labels")
    if len(splits.train_nodes) == 0 or len(splits.test_nodes) == 0:
        raise ValueError("train/test node split is empty")
    y = g.labels
    n_cls = int(y.max()) + 1
    x = node_features(g)
    if not sp.issparse(x):
        x = np.asarray(x)
    rng = stream(seed, "nodeclass_init")
    enc = sa.GcnEncoder(sa._glorot(rng, x.shape[1], hidden), sa._glorot(rng, hidden, n_cls))
    prop = sa._Propagation(as_weighted_pairs(g))
    params = {"W1": enc.W1, "W2": enc.W2}
    opt = Adam(params, lr=lr)
    tr = splits.train_nodes
    onehot = np.eye(n_cls)[y[tr]]
    for _ in range(epochs):
        z, cache = sa._encode(enc, prop, x)
        prob = _softmax(z[tr])
        dz = np.zeros_like(z)
        dz[tr] = (prob - onehot) / len(tr)
        grads, _ = sa._encoder_backward(enc, prop, x, cache, dz)
        for k in grads:
            grads[k] = grads[k] + weight_decay * params[k]
        opt.step(grads)
    z, _ = sa._encode(enc, prop, x)
    te = splits.test_nodes
    pred = z[te].argmax(axis=1)
    return (float(f1_score(y[te], pred, average="micro")),
            float(f1_score(y[te], pred, average="macro")))


def distortion_report(original, published) -> UtilityReport:
    """Squared Frobenius distance and edge edit counts."""
    a, b = _graph(original), _graph(published)
    if a.n != b.n:
        raise ValueError(f"node counts differ: {a.n} vs {b.n}")
    d = (a.adjacency - b.adjacency).tocoo()
    ka, kb = a.edge_keys, b.edge_keys
    return UtilityReport(
        distortion=float(np.sum(d.data**2)),
        deleted=int(np.setdiff1d(ka, kb).size),
        added=int(np.setdiff1d(kb, ka).size),
    )


def evaluate_utility(published, original: Graph, splits: DataSplits,
                     cfg: sa.AttackTrainConfig | None = None, seed=0) -> UtilityReport:
    """All utility metrics; node classification is skipped when labels are missing."""
    rep = distortion_report(original, published)
    if len(splits.util_test_pos):
        rep.linkpred_auc = linkpred_eval(published, splits, cfg)
    g = _graph(published)
    if g.labels is not None and len(splits.train_nodes):
        rep.nodeclass_f1_micro, rep.nodeclass_f1_macro = nodeclass_eval(
            published, splits, seed=child_seed(seed, "nodeclass"))
    else:
        log.warning("no labels or node split: node classification omitted")
    return rep

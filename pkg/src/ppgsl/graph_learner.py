"""Trainable published graph: candidate parameterization, losses, release.

Two parameterizations are supported. ``fgp`` keeps a full ``n x n`` matrix
``theta`` and materializes ``clip((theta + theta.T) / 2, 0, 1)``.
``sparse`` keeps one value per candidate pair (every visible edge plus
``k * |E|`` sampled non-edges), so symmetrization is the identity and the
learned weight is ``clip(theta, 0, 1)``. Sensitive pairs are never
candidates in either mode.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import surrogate_attack as sa
from .graph_core import (DataSplits, Graph, WeightedPairs, _in_sorted, as_weighted_pairs,
                         keys_to_pairs, pair_keys, sample_pairs_excluding, save_graph)
from .seeding import stream

MODES = ("sparse", "fgp")


@dataclass
class CandidateEdgeSet:
    mode: str
    n: int
    pairs: np.ndarray
    k: float = 0.0


@dataclass
class LearnerParams:
    theta: np.ndarray
    candidates: CandidateEdgeSet
    original: np.ndarray  # original weight of each candidate pair


@dataclass
class PublishedGraph:
    graph: Graph
    provenance: dict = field(default_factory=dict)

    def save(self, path) -> None:
        save_graph(self.graph, path)
        side = Path(path).with_name(Path(path).name + ".provenance.json")
        side.write_text(json.dumps(self.provenance, sort_keys=True, indent=2) + "\n",
                        encoding="utf-8")


@dataclass
class LossParts:
    total: float
    privacy: float
    utility: float


def init_learner(g: Graph, splits: DataSplits, mode="sparse", k=1.0, seed=0) -> LearnerParams:
    """Warm-started learner: existing edges at their weight, sampled non-edges at 0."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if k < 0:
        raise ValueError("k must be >= 0")
    pairs, w = g.edges()
    s_keys = np.sort(pair_keys(splits.sensitive, g.n))
    if mode == "fgp":
        i, j = np.triu_indices(g.n, k=1)
        keys = i.astype(np.int64) * g.n + j
        keys = keys[~_in_sorted(keys, s_keys)]
        cand = keys_to_pairs(keys, g.n)
        theta = g.dense()
        theta[splits.sensitive[:, 0], splits.sensitive[:, 1]] = 0.0
        theta[splits.sensitive[:, 1], splits.sensitive[:, 0]] = 0.0
        original = theta[cand[:, 0], cand[:, 1]].copy()
        return LearnerParams(theta, CandidateEdgeSet("fgp", g.n, cand, k), original)

    n_new = int(math.floor(k * len(pairs)))
    forbidden = np.unique(np.concatenate([g.edge_keys, s_keys]))
    try:
        new = sample_pairs_excluding(g.n, n_new, forbidden, stream(seed, "candidates"))
    except ValueError as exc:
        raise ValueError(f"cannot sample {n_new} candidate non-edges: {exc}") from exc
    cand = np.concatenate([pairs, new])
    keys = pair_keys(cand, g.n)
    order = np.argsort(keys, kind="stable")
    cand = cand[order]
    original = np.concatenate([w, np.zeros(len(new))])[order]
    return LearnerParams(original.copy(), CandidateEdgeSet("sparse", g.n, cand, k), original)


def candidate_weights(p: LearnerParams) -> np.ndarray:
    """Materialized weight of each candidate pair."""
    c = p.candidates
    if c.mode == "fgp":
        th = p.theta
        raw = (th[c.pairs[:, 0], c.pairs[:, 1]] + th[c.pairs[:, 1], c.pairs[:, 0]]) / 2.0
    else:
        raw = p.theta
    return np.clip(raw, 0.0, 1.0)


def materialize_pairs(p: LearnerParams) -> WeightedPairs:
    return WeightedPairs(p.candidates.n, p.candidates.pairs, candidate_weights(p))


def materialize(p: LearnerParams):
    """Learned adjacency: dense for ``fgp``, CSR for ``sparse``.

    The sparse result stores every candidate pair, zeros included.
    """
    wp = materialize_pairs(p)
    if p.candidates.mode == "fgp":
        a = np.zeros((wp.n, wp.n))
        a[wp.pairs[:, 0], wp.pairs[:, 1]] = wp.weights
        a[wp.pairs[:, 1], wp.pairs[:, 0]] = wp.weights
        return a
    return wp.to_sparse()


def privacy_loss(model, a_prime, features, sensitive) -> float:
    return sa.loss_value(model, a_prime, features, sa.LossSpec.privacy(sensitive))


def utility_loss(a, a_prime) -> float:
    """Squared Frobenius distance over all entries (both triangles)."""
    if sp.issparse(a) or sp.issparse(a_prime):
        a = sp.csr_matrix(a)
        a_prime = sp.csr_matrix(a_prime)
        if a.shape != a_prime.shape:
            raise ValueError(f"shape mismatch: {a.shape} vs {a_prime.shape}")
        d = (a - a_prime).tocoo()
        return float(np.sum(d.data**2))
    a = np.asarray(a, dtype=np.float64)
    a_prime = np.asarray(a_prime, dtype=np.float64)
    if a.shape != a_prime.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {a_prime.shape}")
    return float(np.sum((a - a_prime) ** 2))


def learner_loss(model, a, a_prime, features, sensitive, alpha) -> float:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return privacy_loss(model, a_prime, features, sensitive) + alpha * utility_loss(a, a_prime)


def learner_grad(model, p: LearnerParams, features, sensitive, alpha, privacy_weight=1.0):
    """Gradient of ``privacy_weight * L_priv + alpha * L_util`` w.r.t. theta.

    The clip is passed straight through. Returns ``(grad, LossParts)``; the
    gradient has the shape of ``p.theta``.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    wp = materialize_pairs(p)
    diff = wp.weights - p.original
    util = 2.0 * float(diff @ diff)
    if privacy_weight != 0.0:
        priv, d_w = sa.loss_grad_wrt_pairs(model, wp, features, sa.LossSpec.privacy(sensitive))
        d_w = privacy_weight * d_w
    else:
        priv, d_w = 0.0, np.zeros(len(diff))
    # each pair weight appears twice in the Frobenius sum
    d_w = d_w + alpha * 4.0 * diff
    if not np.isfinite(d_w).all():
        raise FloatingPointError("non-finite learner gradient")
    if p.candidates.mode == "fgp":
        g = np.zeros_like(p.theta)
        c = p.candidates.pairs
        g[c[:, 0], c[:, 1]] = d_w / 2.0
        g[c[:, 1], c[:, 0]] = d_w / 2.0
    else:
        g = d_w
    return g, LossParts(privacy_weight * priv + alpha * util, priv, util)


def discretize(a_prime, seed, template: Graph | None = None, provenance=None) -> PublishedGraph:
    """One Bernoulli draw per stored pair, with the learned weight as probability."""
    wp = as_weighted_pairs(a_prime)
    w = wp.weights
    if w.size and (w.min() < 0 or w.max() > 1):
        raise ValueError("weights must lie in [0, 1]")
    u = stream(seed, "discretize").random(len(w))
    keep = u < w
    pairs = wp.pairs[keep]
    if template is not None:
        g = template.with_edges(pairs)
    else:
        g = Graph.from_edges(wp.n, pairs)
    return PublishedGraph(g, dict(provenance or {}))

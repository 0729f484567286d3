"""Competing defenses: Random, DICE, EdgeRand and LapGraph.

Every method treats the input as unweighted and never adds a sensitive
pair, so outputs are comparable with the learned release.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph_core import (DataSplits, Graph, _in_sorted, keys_to_pairs, pair_keys,
                         sample_pairs_excluding, triu_decode)
from .graph_learner import PublishedGraph
from .seeding import stream

METHODS = ("random", "dice", "edgerand", "lapgraph")
DEFAULT_MAX_NODES = 10_000
LAPGRAPH_DENSITY_SHARE = 0.1
_CHUNK = 1 << 20


@dataclass
class BaselineConfig:
    method: str
    budget: float
    seed: int = 0
    epsilon1: float | None = None
    epsilon2: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not self.budget > 0:
            raise ValueError("budget must be > 0")
        if self.method == "lapgraph":
            if self.epsilon1 is None and self.epsilon2 is None:
                self.epsilon1 = LAPGRAPH_DENSITY_SHARE * self.budget
                self.epsilon2 = self.budget - self.epsilon1
            if not math.isclose(self.epsilon1 + self.epsilon2, self.budget, rel_tol=1e-9):
                raise ValueError("epsilon1 + epsilon2 must equal the budget")


def _sensitive_keys(g: Graph, splits: DataSplits | None) -> np.ndarray:
    if splits is None or len(splits.sensitive) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.unique(pair_keys(splits.sensitive, g.n))


def _publish(g, pairs, method, seed, **extra) -> PublishedGraph:
    prov = {"method": method, "seed": seed, **extra}
    return PublishedGraph(g.with_edges(pairs), prov)


def _check_edits(edits):
    if edits < 0 or int(edits) != edits:
        raise ValueError(f"edits must be a non-negative integer, got {edits}")
    return int(edits)


def random_perturb(g: Graph, edits: int, seed, splits: DataSplits | None = None) -> PublishedGraph:
    """Delete ``edits`` uniform edges and add ``edits`` uniform non-edges."""
    edits = _check_edits(edits)
    pairs, _ = g.edges()
    if edits > len(pairs):
        raise ValueError(f"edits={edits} exceeds the {len(pairs)} edges")
    rng = stream(seed, "random_perturb")
    forbidden = np.unique(np.concatenate([g.edge_keys, _sensitive_keys(g, splits)]))
    drop = rng.choice(len(pairs), size=edits, replace=False)
    try:
        add = sample_pairs_excluding(g.n, edits, forbidden, rng)
    except ValueError as exc:
        raise ValueError(f"random_perturb: not enough non-edges ({exc})") from exc
    kept = np.delete(pairs, drop, axis=0)
    return _publish(g, np.concatenate([kept, add]), "random", seed, edits=edits)


def dice_perturb(g: Graph, splits: DataSplits, edits: int, seed) -> PublishedGraph:
    """Delete edges touching sensitive endpoints; add edges among the other nodes."""
    edits = _check_edits(edits)
    pairs, _ = g.edges()
    sens = np.zeros(g.n, dtype=bool)
    sens[splits.sensitive_nodes()] = True
    touching = np.flatnonzero(sens[pairs[:, 0]] | sens[pairs[:, 1]])
    if edits > touching.size:
        raise ValueError(f"dice: only {touching.size} edges touch sensitive nodes, "
                         f"{edits} deletions requested")
    outside = np.flatnonzero(~sens)
    m = outside.size
    # relabel the outside nodes to 0..m-1 and forbid their existing edges
    local = np.full(g.n, -1, dtype=np.int64)
    local[outside] = np.arange(m)
    inner = pairs[(~sens[pairs[:, 0]]) & (~sens[pairs[:, 1]])]
    forbidden = np.unique(pair_keys(np.sort(local[inner], axis=1), m)) if len(inner) \
        else np.zeros(0, dtype=np.int64)
    free = m * (m - 1) // 2 - forbidden.size
    if edits > free:
        raise ValueError(f"dice: only {free} non-edges among non-sensitive nodes, "
                         f"{edits} additions requested")
    rng = stream(seed, "dice_perturb")
    drop = touching[rng.choice(touching.size, size=edits, replace=False)]
    add = outside[sample_pairs_excluding(m, edits, forbidden, rng)] if edits else \
        np.zeros((0, 2), dtype=np.int64)
    kept = np.delete(pairs, drop, axis=0)
    return _publish(g, np.concatenate([kept, add]), "dice", seed, edits=edits)


def flip_probability(epsilon: float) -> float:
    """Randomized-response flip probability ``1 / (1 + e^eps)``."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if math.isinf(epsilon):
        return 0.0
    return 1.0 / (1.0 + math.exp(epsilon))


def _check_size(g: Graph, max_nodes):
    if max_nodes is not None and g.n > max_nodes:
        raise ValueError(f"graph has {g.n} nodes, above the dense-pass cap of {max_nodes}")


def _upper_chunks(n):
    total = n * (n - 1) // 2
    for lo in range(0, total, _CHUNK):
        yield lo, min(total, lo + _CHUNK)


def edgerand_perturb(g: Graph, epsilon: float, seed, splits: DataSplits | None = None,
                     max_nodes=DEFAULT_MAX_NODES) -> PublishedGraph:
    """Flip every unordered pair independently with probability ``1/(1+e^eps)``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    _check_size(g, max_nodes)
    p = flip_probability(epsilon)
    rng = stream(seed, "edgerand")
    edge_keys = g.edge_keys
    s_keys = _sensitive_keys(g, splits)
    out = []
    flips = 0
    for lo, hi in _upper_chunks(g.n):
        flip = rng.random(hi - lo) < p
        idx = np.arange(lo, hi, dtype=np.int64)
        i, j = triu_decode(idx, g.n)
        keys = i * g.n + j
        is_edge = _in_sorted(keys, edge_keys)
        flips += int(flip.sum())
        on = is_edge ^ flip
        on &= ~_in_sorted(keys, s_keys)
        out.append(keys[on])
    keys = np.concatenate(out) if out else np.zeros(0, dtype=np.int64)
    pub = _publish(g, keys_to_pairs(keys, g.n), "edgerand", seed, epsilon=epsilon,
                   p_flip=p)
    pub.provenance["flips"] = flips
    return pub


def lapgraph_perturb(g: Graph, epsilon1: float, epsilon2: float, seed,
                     splits: DataSplits | None = None,
                     max_nodes=DEFAULT_MAX_NODES) -> PublishedGraph:
    """Laplace-noised adjacency, keeping the ``m_hat`` largest entries.

    ``m_hat`` is the edge count plus ``Lap(1/eps1)``, rounded and clamped at
    zero; every upper-triangular entry gets ``Lap(1/eps2)`` noise.
    """
    if not (epsilon1 > 0 and epsilon2 > 0):
        raise ValueError("epsilon1 and epsilon2 must be > 0")
    _check_size(g, max_nodes)
    rng = stream(seed, "lapgraph")
    m_hat = max(0, int(round(g.num_edges + rng.laplace(0.0, 1.0 / epsilon1))))
    edge_keys = g.edge_keys
    s_keys = _sensitive_keys(g, splits)
    best_keys = np.zeros(0, dtype=np.int64)
    best_vals = np.zeros(0)
    for lo, hi in _upper_chunks(g.n):
        i, j = triu_decode(np.arange(lo, hi, dtype=np.int64), g.n)
        keys = i * g.n + j
        vals = _in_sorted(keys, edge_keys).astype(np.float64)
        vals += rng.laplace(0.0, 1.0 / epsilon2, size=vals.size)
        ok = ~_in_sorted(keys, s_keys)
        keys = np.concatenate([best_keys, keys[ok]])
        vals = np.concatenate([best_vals, vals[ok]])
        if m_hat < keys.size:
            top = np.argpartition(-vals, m_hat)[:m_hat] if m_hat else np.zeros(0, np.int64)
            keys, vals = keys[top], vals[top]
        best_keys, best_vals = keys, vals
    pub = _publish(g, keys_to_pairs(np.sort(best_keys), g.n), "lapgraph", seed,
                   epsilon1=epsilon1, epsilon2=epsilon2)
    pub.provenance["m_hat"] = m_hat
    return pub


def run_baseline(g: Graph, splits: DataSplits, cfg: BaselineConfig,
                 max_nodes=DEFAULT_MAX_NODES) -> PublishedGraph:
    if cfg.method == "random":
        return random_perturb(g, int(cfg.budget), cfg.seed, splits)
    if cfg.method == "dice":
        return dice_perturb(g, splits, int(cfg.budget), cfg.seed)
    if cfg.method == "edgerand":
        return edgerand_perturb(g, cfg.budget, cfg.seed, splits, max_nodes)
    return lapgraph_perturb(g, cfg.epsilon1, cfg.epsilon2, cfg.seed, splits, max_nodes)

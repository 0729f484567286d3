"""Graphs, splits, file I/O, generators and GCN normalization.

Node ids are dense ``0..n-1``. Unordered node pairs are stored as int64
arrays of shape ``(m, 2)`` with ``i < j``; ``pair_keys`` turns them into
scalar keys ``i * n + j`` for fast membership tests.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .seeding import stream

log = logging.getLogger(__name__)

IDENTITY_FEATURE_MAX_N = 10_000
DEGREE_BUCKETS = 32
# below this many unordered pairs we sample from the enumerated complement
_ENUMERATE_MAX_PAIRS = 2_000_000


class GraphFormatError(ValueError):
    """Raised for malformed graph, feature, label or split files."""


# ---------------------------------------------------------------- pairs


def as_pairs(pairs) -> np.ndarray:
    """Canonical ``(m, 2)`` int64 array with the smaller id first."""
    a = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if a.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.sort(a, axis=1)


def pair_keys(pairs, n: int) -> np.ndarray:
    p = as_pairs(pairs)
    return p[:, 0] * n + p[:, 1]


def keys_to_pairs(keys, n: int) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64)
    return np.stack([keys // n, keys % n], axis=1)


def _in_sorted(keys, sorted_keys) -> np.ndarray:
    if sorted_keys.size == 0:
        return np.zeros(len(keys), dtype=bool)
    pos = np.searchsorted(sorted_keys, keys)
    pos = np.minimum(pos, sorted_keys.size - 1)
    return sorted_keys[pos] == keys


def triu_decode(idx, n: int):
    """Map linear indices over the strict upper triangle (row-major) to (i, j)."""
    idx = np.asarray(idx, dtype=np.int64)
    # row i owns indices [i*n - i*(i+1)/2, ...); invert with a float guess, then fix up
    b = 2 * n - 1
    i = np.floor((b - np.sqrt(np.maximum(b * b - 8.0 * idx, 0.0))) / 2).astype(np.int64)
    i = np.clip(i, 0, n - 2)

    def start(r):
        return r * n - r * (r + 1) // 2

    for _ in range(3):
        i = np.where(start(i) > idx, i - 1, i)
        i = np.where(start(i + 1) <= idx, i + 1, i)
    j = idx - start(i) + i + 1
    return i, j


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph with optional node features and labels."""

    n: int
    adjacency: sp.csr_matrix
    features: np.ndarray = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        if self.features is None:
            object.__setattr__(self, "features", np.zeros((self.n, 0)))
        if self.features.shape[0] != self.n:
            raise ValueError(
                f"feature rows ({self.features.shape[0]}) != node count ({self.n})"
            )
        if self.labels is not None and len(self.labels) != self.n:
            raise ValueError("label count != node count")

    @classmethod
    def from_edges(cls, n, pairs, weights=None, features=None, labels=None):
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if (pairs[:, 0] == pairs[:, 1]).any():
            raise ValueError("self-loops are not allowed")
        if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
            raise ValueError("node index out of range")
        pairs = as_pairs(pairs)
        w = np.ones(len(pairs)) if weights is None else np.asarray(weights, dtype=np.float64)
        if w.size and (w.min() < 0 or w.max() > 1):
            raise ValueError("edge weights must lie in [0, 1]")
        keys = pair_keys(pairs, n)
        keys, first = np.unique(keys, return_index=True)
        pairs, w = keys_to_pairs(keys, n), w[first]
        keep = w > 0
        pairs, w = pairs[keep], w[keep]
        adj = sp.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([pairs[:, 0], pairs[:, 1]]),
                                      np.concatenate([pairs[:, 1], pairs[:, 0]]))),
            shape=(n, n),
        ).tocsr()
        adj.sort_indices()
        if features is not None:
            features = np.asarray(features, dtype=np.float64)
            if features.ndim == 1:
                features = features.reshape(n, -1)
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
        return cls(int(n), adj, features, labels)

    def with_edges(self, pairs, weights=None) -> "Graph":
        """Same nodes, features and labels; new edge set."""
        return Graph.from_edges(self.n, pairs, weights, self.features, self.labels)

    def edges(self):
        """Upper-triangle ``(pairs, weights)``, sorted by (i, j)."""
        up = sp.triu(self.adjacency, k=1).tocoo()
        pairs = np.stack([up.row, up.col], axis=1).astype(np.int64)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        return pairs[order], up.data[order].astype(np.float64)

    @property
    def num_edges(self) -> int:
        return int(sp.triu(self.adjacency, k=1).nnz)

    @property
    def edge_keys(self) -> np.ndarray:
        return pair_keys(self.edges()[0], self.n)

    def degrees(self) -> np.ndarray:
        """Unweighted degree (neighbour count)."""
        return np.diff(self.adjacency.indptr).astype(np.int64)

    def dense(self) -> np.ndarray:
        return self.adjacency.toarray()

    def has_edges(self, pairs) -> np.ndarray:
        return _in_sorted(pair_keys(pairs, self.n), self.edge_keys)


@dataclass
class DataSplits:
    """Sensitive links, evaluation negatives and utility-task splits."""

    sensitive: np.ndarray
    eval_negatives: np.ndarray
    util_test_pos: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), np.int64))
    util_test_neg: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), np.int64))
    train_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    test_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    def __post_init__(self):
        self.sensitive = as_pairs(self.sensitive)
        self.eval_negatives = as_pairs(self.eval_negatives)
        self.util_test_pos = as_pairs(self.util_test_pos)
        self.util_test_neg = as_pairs(self.util_test_neg)
        self.train_nodes = np.asarray(self.train_nodes, dtype=np.int64)
        self.test_nodes = np.asarray(self.test_nodes, dtype=np.int64)

    def sensitive_nodes(self) -> np.ndarray:
        return np.unique(self.sensitive.reshape(-1))

    def validate(self, g: Graph):
        """Check the disjointness invariants against the visible graph ``g``."""
        n = g.n
        if g.has_edges(self.sensitive).any():
            raise ValueError("a sensitive pair is visible in the graph")
        s_keys = np.sort(pair_keys(self.sensitive, n))
        neg_keys = pair_keys(self.eval_negatives, n)
        if g.has_edges(self.eval_negatives).any() or _in_sorted(neg_keys, s_keys).any():
            raise ValueError("an evaluation negative is an edge or a sensitive pair")
        for name in ("util_test_pos", "util_test_neg"):
            if _in_sorted(pair_keys(getattr(self, name), n), s_keys).any():
                raise ValueError(f"{name} overlaps the sensitive set")
        if np.intersect1d(self.train_nodes, self.test_nodes).size:
            raise ValueError("train and test nodes overlap")


# ---------------------------------------------------------------- file I/O

_NODES_RE = re.compile(r"^#\s*nodes\s*[:=]?\s*(\d+)\s*$")


def load_graph(edge_path, feature_path=None, label_path=None, id_map_path=None) -> Graph:
    """Read a tab-separated edge list (``u v [w]``) plus optional sidecars.

    A ``# nodes N`` comment fixes the node count (needed for isolated
    trailing nodes); otherwise it is ``max id + 1``. With ``id_map_path``
    (one external id per line, line number = internal id) the edge file may
    use external ids.
    """
    id_map = None
    if id_map_path is not None:
        ids = [ln.strip() for ln in Path(id_map_path).read_text(encoding="utf-8").splitlines()]
        id_map = {tok: i for i, tok in enumerate(t for t in ids if t)}

    n_header = None
    seen: dict[tuple[int, int], float] = {}
    with open(edge_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = _NODES_RE.match(line)
                if m:
                    n_header = int(m.group(1))
                continue
            tok = line.split()
            if len(tok) not in (2, 3):
                raise GraphFormatError(f"{edge_path}:{lineno}: expected 'u v [w]', got {line!r}")
            try:
                if id_map is not None:
                    u, v = id_map[tok[0]], id_map[tok[1]]
                else:
                    u, v = int(tok[0]), int(tok[1])
                w = float(tok[2]) if len(tok) == 3 else 1.0
            except (ValueError, KeyError) as exc:
                raise GraphFormatError(f"{edge_path}:{lineno}: cannot parse {line!r}") from exc
            if u == v:
                raise GraphFormatError(f"{edge_path}:{lineno}: self-loop on node {u}")
            if u < 0 or v < 0:
                raise GraphFormatError(f"{edge_path}:{lineno}: negative node index")
            if not 0.0 <= w <= 1.0 or not math.isfinite(w):
                raise GraphFormatError(f"{edge_path}:{lineno}: weight {w} outside [0, 1]")
            key = (min(u, v), max(u, v))
            if key in seen and seen[key] != w:
                raise GraphFormatError(
                    f"{edge_path}:{lineno}: inconsistent weight for pair {key} "
                    f"({seen[key]} vs {w})"
                )
            seen[key] = w

    max_id = max((max(k) for k in seen), default=-1)
    if id_map is not None:
        n = len(id_map)
    elif n_header is not None:
        n = n_header
        if max_id >= n:
            raise GraphFormatError(f"{edge_path}: node index {max_id} out of range for n={n}")
    else:
        n = max_id + 1

    features = None
    if feature_path is not None:
        features = np.loadtxt(feature_path, delimiter=",", dtype=np.float64, ndmin=2)
        if features.shape[0] != n:
            raise GraphFormatError(
                f"{feature_path}: {features.shape[0]} feature rows for {n} nodes"
            )
    labels = None
    if label_path is not None:
        labels = np.loadtxt(label_path, dtype=np.int64, ndmin=1)
        if labels.shape[0] != n:
            raise GraphFormatError(f"{label_path}: {labels.shape[0]} labels for {n} nodes")

    pairs = np.array(list(seen.keys()), dtype=np.int64).reshape(-1, 2)
    weights = np.array(list(seen.values()), dtype=np.float64)
    return Graph.from_edges(n, pairs, weights, features, labels)


def sidecar_paths(path):
    path = Path(path)
    return path.with_name(path.name + ".features.csv"), path.with_name(path.name + ".labels.txt")


def save_graph(g: Graph, path) -> None:
    """Write the edge list; features and labels go to sidecars when present."""
    path = Path(path)
    pairs, w = g.edges()
    lines = ["# ppgsl edge list", f"# nodes {g.n}"]
    lines += [f"{i}\t{j}\t{x!r}" for (i, j), x in zip(pairs.tolist(), w.tolist())]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    fpath, lpath = sidecar_paths(path)
    if g.features.shape[1] > 0:
        rows = (",".join(repr(float(x)) for x in row) for row in g.features)
        fpath.write_text("\n".join(rows) + "\n", encoding="utf-8")
    if g.labels is not None:
        lpath.write_text("\n".join(str(int(c)) for c in g.labels) + "\n", encoding="utf-8")


def load_graph_with_sidecars(path) -> Graph:
    fpath, lpath = sidecar_paths(path)
    return load_graph(path, fpath if fpath.exists() else None, lpath if lpath.exists() else None)


_SPLIT_SECTIONS = {
    "sensitive": "sensitive",
    "eval_neg": "eval_negatives",
    "test_pos": "util_test_pos",
    "test_neg": "util_test_neg",
    "train_nodes": "train_nodes",
}


def save_splits(splits: DataSplits, path) -> None:
    out = []
    for header, attr in _SPLIT_SECTIONS.items():
        out.append(f"[{header}]")
        val = getattr(splits, attr)
        if val.ndim == 2:
            out += [f"{i}\t{j}" for i, j in val.tolist()]
        else:
            out += [str(v) for v in val.tolist()]
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def load_splits(path, n: int) -> DataSplits:
    """Read a splits file; test nodes are all nodes not listed as training nodes."""
    data = {attr: [] for attr in _SPLIT_SECTIONS.values()}
    current = None
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1]
            if name not in _SPLIT_SECTIONS:
                raise GraphFormatError(f"{path}:{lineno}: unknown section [{name}]")
            current = _SPLIT_SECTIONS[name]
            continue
        if current is None:
            raise GraphFormatError(f"{path}:{lineno}: entry before any section header")
        try:
            vals = [int(t) for t in line.split()]
        except ValueError as exc:
            raise GraphFormatError(f"{path}:{lineno}: cannot parse {line!r}") from exc
        want = 1 if current == "train_nodes" else 2
        if len(vals) != want or min(vals) < 0 or max(vals) >= n:
            raise GraphFormatError(f"{path}:{lineno}: bad entry {line!r}")
        data[current].append(vals if want == 2 else vals[0])
    train = np.array(data["train_nodes"], dtype=np.int64)
    test = np.setdiff1d(np.arange(n), train) if train.size else np.zeros(0, np.int64)
    return DataSplits(
        sensitive=np.array(data["sensitive"], dtype=np.int64).reshape(-1, 2),
        eval_negatives=np.array(data["eval_negatives"], dtype=np.int64).reshape(-1, 2),
        util_test_pos=np.array(data["util_test_pos"], dtype=np.int64).reshape(-1, 2),
        util_test_neg=np.array(data["util_test_neg"], dtype=np.int64).reshape(-1, 2),
        train_nodes=train,
        test_nodes=test,
    )


# ---------------------------------------------------------------- generators


def _sample_block(rng, n_pairs: int, p: float) -> np.ndarray:
    if n_pairs == 0 or p == 0.0:
        return np.zeros(0, dtype=np.int64)
    if p == 1.0:
        return np.arange(n_pairs, dtype=np.int64)
    m = int(rng.binomial(n_pairs, p))
    return np.sort(rng.choice(n_pairs, size=m, replace=False)).astype(np.int64)


def generate_erdos_renyi(n: int, avg_degree: float, seed) -> Graph:
    """G(n, p) with ``p = avg_degree / (n - 1)``; featureless, unit weights."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0 < avg_degree <= n - 1:
        raise ValueError(f"avg_degree must lie in (0, n-1], got {avg_degree}")
    p = avg_degree / (n - 1)
    rng = stream(seed, "erdos_renyi")
    idx = _sample_block(rng, n * (n - 1) // 2, p)
    i, j = triu_decode(idx, n)
    return Graph.from_edges(n, np.stack([i, j], axis=1))


def generate_sbm(block_sizes, p_in: float, p_out: float, seed, with_features=False) -> Graph:
    """Stochastic block model; labels are block ids.

    ``with_features`` attaches the one-hot block membership as node features
    (two columns for two blocks, one per block in general).
    """
    sizes = [int(s) for s in block_sizes]
    if not sizes or min(sizes) < 1:
        raise ValueError("block sizes must all be >= 1")
    for name, p in (("p_in", p_in), ("p_out", p_out)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {p}")
    rng = stream(seed, "sbm")
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = int(offsets[-1])
    parts = []
    for a, sa in enumerate(sizes):
        idx = _sample_block(rng, sa * (sa - 1) // 2, p_in)
        if sa >= 2:
            i, j = triu_decode(idx, sa)
            parts.append(np.stack([i, j], axis=1) + offsets[a])
        for b in range(a + 1, len(sizes)):
            sb = sizes[b]
            idx = _sample_block(rng, sa * sb, p_out)
            parts.append(np.stack([idx // sb + offsets[a], idx % sb + offsets[b]], axis=1))
    pairs = np.concatenate(parts) if parts else np.zeros((0, 2), np.int64)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    features = np.eye(len(sizes))[labels] if with_features else None
    return Graph.from_edges(n, pairs, features=features, labels=labels)


# ---------------------------------------------------------------- sampling


def _count_free_pairs(n, forbidden_keys) -> int:
    return n * (n - 1) // 2 - forbidden_keys.size


def sample_pairs_excluding(n: int, count: int, forbidden_keys, rng) -> np.ndarray:
    """``count`` distinct unordered pairs whose keys are not in ``forbidden_keys``.

    ``forbidden_keys`` must be sorted and unique.
    """
    count = int(count)
    free = _count_free_pairs(n, forbidden_keys)
    if count > free:
        raise ValueError(f"requested {count} pairs but only {free} are available")
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)
    total = n * (n - 1) // 2
    if total <= _ENUMERATE_MAX_PAIRS or count > free // 2:
        i, j = np.triu_indices(n, k=1)
        keys = i.astype(np.int64) * n + j
        keys = keys[~_in_sorted(keys, forbidden_keys)]
        chosen = rng.choice(keys.size, size=count, replace=False)
        return keys_to_pairs(keys[chosen], n)
    # rejection over random ordered draws, keeping first occurrences
    chosen = np.zeros(0, dtype=np.int64)
    while chosen.size < count:
        need = count - chosen.size
        batch = int(need * 1.3) + 16
        u = rng.integers(0, n, size=batch)
        v = rng.integers(0, n, size=batch)
        ok = u != v
        keys = np.minimum(u, v)[ok] * n + np.maximum(u, v)[ok]
        keys = keys[~_in_sorted(keys, forbidden_keys)]
        _, first = np.unique(keys, return_index=True)
        keys = keys[np.sort(first)]
        if chosen.size:
            keys = keys[~np.isin(keys, chosen)]
        chosen = np.concatenate([chosen, keys[:need]])
    return keys_to_pairs(chosen, n)


def _forbidden(g: Graph, exclude) -> np.ndarray:
    parts = [g.edge_keys]
    for ex in exclude or ():
        parts.append(pair_keys(ex, g.n))
    return np.unique(np.concatenate(parts)) if parts else np.zeros(0, np.int64)


def sample_negative_pairs(g: Graph, count: int, exclude=(), seed=0) -> np.ndarray:
    """Distinct non-adjacent pairs of ``g`` avoiding every pair in ``exclude``.

    ``exclude`` is an iterable of pair arrays.
    """
    return sample_pairs_excluding(g.n, count, _forbidden(g, exclude), stream(seed, "negatives"))


def mask_sensitive(g: Graph, fraction: float, seed):
    """Hide ``floor(fraction * |E|)`` random edges as the sensitive set.

    Returns the visible graph and splits holding the sensitive pairs plus an
    equal number of evaluation negatives drawn from pairs absent in ``g``.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    pairs, w = g.edges()
    n_s = int(math.floor(fraction * len(pairs)))
    free = _count_free_pairs(g.n, g.edge_keys)
    if free < max(n_s, 1):
        raise ValueError(f"only {free} non-adjacent pairs; cannot draw evaluation negatives")
    if len(pairs) < 10:
        raise ValueError(f"need at least 10 edges to mask, graph has {len(pairs)}")
    if n_s < 1:
        raise ValueError("fraction too small: no edge would be masked")
    rng = stream(seed, "mask_sensitive")
    pick = np.sort(rng.choice(len(pairs), size=n_s, replace=False))
    keep = np.ones(len(pairs), dtype=bool)
    keep[pick] = False
    sensitive = pairs[pick]
    negatives = sample_pairs_excluding(g.n, n_s, g.edge_keys, stream(seed, "eval_negatives"))
    visible = g.with_edges(pairs[keep], w[keep])
    return visible, DataSplits(sensitive=sensitive, eval_negatives=negatives)


def add_utility_splits(visible: Graph, splits: DataSplits, seed, test_fraction=0.1,
                       train_fraction=0.3):
    """Hold out link-prediction test edges and split nodes for classification.

    ``floor(test_fraction * (|E_visible| + |E_s|))`` visible edges are
    removed from the graph and become positive test links; negatives are
    drawn from pairs that were never edges and are not evaluation
    negatives. Returns the reduced graph and the completed splits.
    """
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must lie in [0, 1)")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    pairs, w = visible.edges()
    n_test = int(math.floor(test_fraction * (len(pairs) + len(splits.sensitive))))
    rng = stream(seed, "utility_split")
    pick = np.sort(rng.choice(len(pairs), size=n_test, replace=False))
    keep = np.ones(len(pairs), dtype=bool)
    keep[pick] = False
    forbidden = np.unique(np.concatenate([
        visible.edge_keys,
        pair_keys(splits.sensitive, visible.n),
        pair_keys(splits.eval_negatives, visible.n),
    ]))
    test_neg = sample_pairs_excluding(visible.n, n_test, forbidden, stream(seed, "utility_neg"))
    perm = stream(seed, "node_split").permutation(visible.n)
    n_train = max(1, int(round(train_fraction * visible.n)))
    out = DataSplits(
        sensitive=splits.sensitive,
        eval_negatives=splits.eval_negatives,
        util_test_pos=pairs[pick],
        util_test_neg=test_neg,
        train_nodes=np.sort(perm[:n_train]),
        test_nodes=np.sort(perm[n_train:]),
    )
    return visible.with_edges(pairs[keep], w[keep]), out


def prepare_experiment(g: Graph, seed, sensitive_fraction=0.1, test_fraction=0.1,
                       train_fraction=0.3):
    """Sensitive masking followed by the utility splits."""
    visible, splits = mask_sensitive(g, sensitive_fraction, seed)
    return add_utility_splits(visible, splits, seed, test_fraction, train_fraction)


# ---------------------------------------------------------------- normalization


def normalize_adjacency(g) -> np.ndarray:
    """Dense ``D^-1/2 (A + I) D^-1/2`` with ``D`` the weighted degree plus one."""
    a = g.dense() if isinstance(g, Graph) else np.asarray(g.toarray() if sp.issparse(g) else g,
                                                          dtype=np.float64)
    if (a < 0).any():
        raise ValueError("adjacency has negative weights")
    m = a + np.eye(a.shape[0])
    s = 1.0 / np.sqrt(m.sum(axis=1))
    return m * s[:, None] * s[None, :]


def gcn_propagation(n: int, pairs, weights):
    """Sparse normalized adjacency for weighted pairs, plus ``d^-1/2``.

    Zero-weight pairs are kept as explicit entries so that the sparsity
    pattern stays fixed while weights move during training.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    w = np.asarray(weights, dtype=np.float64)
    if w.size and w.min() < 0:
        raise ValueError("adjacency has negative weights")
    deg = np.ones(n)
    np.add.at(deg, pairs[:, 0], w)
    np.add.at(deg, pairs[:, 1], w)
    s = 1.0 / np.sqrt(deg)
    off = w * s[pairs[:, 0]] * s[pairs[:, 1]]
    diag = np.arange(n)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1], diag])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0], diag])
    vals = np.concatenate([off, off, s * s])
    a_hat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    a_hat.sort_indices()
    return a_hat, s


def node_features(g: Graph):
    """Encoder input: real features, else identity, else degree buckets.

    Identity features come back as a sparse matrix; featureless graphs with
    more than ``IDENTITY_FEATURE_MAX_N`` nodes get one-hot log-spaced degree
    buckets instead.
    """
    if g.features.shape[1] > 0:
        return g.features
    if g.n <= IDENTITY_FEATURE_MAX_N:
        return sp.identity(g.n, format="csr", dtype=np.float64)
    return degree_bucket_features(g)


def degree_bucket_features(g: Graph) -> np.ndarray:
    """One-hot log-spaced degree buckets, ``DEGREE_BUCKETS`` columns."""
    deg = g.degrees().astype(np.float64)
    top = np.log1p(max(deg.max(), 1.0)) + 1e-12
    bucket = np.minimum((np.log1p(deg) / top * DEGREE_BUCKETS).astype(np.int64),
                        DEGREE_BUCKETS - 1)
    x = np.zeros((g.n, DEGREE_BUCKETS))
    x[np.arange(g.n), bucket] = 1.0
    return x


@dataclass(frozen=True)
class WeightedPairs:
    """A symmetric weighted adjacency given by its upper-triangle pairs.

    Zero weights are allowed and mark pairs that belong to a fixed
    sparsity pattern (e.g. learner candidates) without being edges.
    """

    n: int
    pairs: np.ndarray
    weights: np.ndarray

    def edges(self):
        keep = self.weights > 0
        return self.pairs[keep], self.weights[keep]

    def edge_keys(self) -> np.ndarray:
        return np.sort(pair_keys(self.edges()[0], self.n))

    def to_sparse(self) -> sp.csr_matrix:
        p, w = self.pairs, self.weights
        return sp.csr_matrix(
            (np.concatenate([w, w]), (np.concatenate([p[:, 0], p[:, 1]]),
                                      np.concatenate([p[:, 1], p[:, 0]]))),
            shape=(self.n, self.n),
        )


def as_weighted_pairs(adj) -> WeightedPairs:
    """Accept a Graph, scipy sparse or dense matrix, or WeightedPairs.

    Dense input keeps every upper-triangle pair (zeros included) so that
    gradients cover the whole matrix; sparse input keeps stored entries.
    """
    if isinstance(adj, WeightedPairs):
        return adj
    if isinstance(adj, Graph):
        p, w = adj.edges()
        return WeightedPairs(adj.n, p, w)
    if sp.issparse(adj):
        up = sp.triu(adj, k=1).tocoo()
        p = np.stack([up.row, up.col], axis=1).astype(np.int64)
        order = np.lexsort((p[:, 1], p[:, 0]))
        return WeightedPairs(adj.shape[0], p[order], up.data[order].astype(np.float64))
    a = np.asarray(adj, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    i, j = np.triu_indices(a.shape[0], k=1)
    return WeightedPairs(a.shape[0], np.stack([i, j], axis=1).astype(np.int64), a[i, j].copy())

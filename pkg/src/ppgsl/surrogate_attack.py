"""GCN link-inference attacker with analytic gradients.

The model is a two-layer GCN encoder ``Z = A_hat relu(A_hat X W1) W2``
followed by a pairwise head (cosine, inner product or MLP) and a sigmoid.
Besides the usual weight gradients, the backward pass also returns the
derivative of a loss with respect to each pair weight of the input
adjacency, differentiating through the degree normalization. That is the
signal the graph learner descends on.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph_core import (WeightedPairs, as_weighted_pairs, gcn_propagation,
                         sample_pairs_excluding)
from .numkit import Adam, bce, relu, rowwise_cosine, sigmoid
from .seeding import stream

log = logging.getLogger(__name__)

HEADS = ("cosine", "inner_product", "mlp")
COSINE_TAU = 5.0
MLP_HIDDEN = 32
MAX_POSITIVES = 20_000
_SDDMM_CHUNK = 65_536


# ---------------------------------------------------------------- model types


@dataclass
class GcnEncoder:
    W1: np.ndarray
    W2: np.ndarray

    @property
    def out_dim(self) -> int:
        return self.W2.shape[1]


@dataclass
class PredictionHead:
    kind: str = "cosine"
    tau: float = COSINE_TAU
    # mlp: W (2*h2, m), b (m,), v (m,), c (1,)
    mlp: dict | None = None

    def __post_init__(self):
        if self.kind not in HEADS:
            raise ValueError(f"unknown head {self.kind!r}; expected one of {HEADS}")


@dataclass
class AttackModel:
    encoder: GcnEncoder
    head: PredictionHead
    loss_history: list = field(default_factory=list, repr=False)

    def params(self) -> dict:
        """Live references to every trainable array."""
        out = {"W1": self.encoder.W1, "W2": self.encoder.W2}
        if self.head.kind == "mlp":
            out.update({f"mlp_{k}": v for k, v in self.head.mlp.items()})
        return out


@dataclass
class AttackTrainConfig:
    epochs: int = 500
    lr: float = 0.01
    samples_per_epoch: int | None = None  # None: all edges up to MAX_POSITIVES
    seed: int = 0
    head: str = "cosine"
    hidden: tuple = (128, 64)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")


def _glorot(rng, fan_in, fan_out):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def init_model(in_dim: int, hidden=(128, 64), head="cosine", rng=None) -> AttackModel:
    """Fresh Glorot-uniform weights."""
    rng = rng if rng is not None else np.random.default_rng()
    h1, h2 = hidden
    enc = GcnEncoder(_glorot(rng, in_dim, h1), _glorot(rng, h1, h2))
    mlp = None
    if head == "mlp":
        mlp = {
            "W": _glorot(rng, 2 * h2, MLP_HIDDEN),
            "b": np.zeros(MLP_HIDDEN),
            "v": _glorot(rng, MLP_HIDDEN, 1)[:, 0],
            "c": np.zeros(1),
        }
    return AttackModel(enc, PredictionHead(head, mlp=mlp))


# ---------------------------------------------------------------- forward / backward


def _features_matrix(features, n):
    if features is None:
        return sp.identity(n, format="csr", dtype=np.float64)
    if sp.issparse(features):
        return features.tocsr()
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != n:
        raise ValueError(f"features must be ({n}, D), got {x.shape}")
    return x


class _Propagation:
    """Normalized adjacency for one weighted-pair set."""

    def __init__(self, wp: WeightedPairs):
        self.wp = wp
        self.a_hat, self.s = gcn_propagation(wp.n, wp.pairs, wp.weights)


def _encode(enc: GcnEncoder, prop: _Propagation, x):
    if x.shape[1] != enc.W1.shape[0]:
        raise ValueError(f"feature dim {x.shape[1]} != encoder input {enc.W1.shape[0]}")
    xw = np.asarray(x @ enc.W1)
    p1 = prop.a_hat @ xw
    h1 = relu(p1)
    hw = h1 @ enc.W2
    z = prop.a_hat @ hw
    if not np.isfinite(z).all():
        raise FloatingPointError("non-finite activations in encoder")
    return z, (xw, p1, h1, hw)


def _head_logits(head: PredictionHead, z, pairs):
    zi, zj = z[pairs[:, 0]], z[pairs[:, 1]]
    if head.kind == "cosine":
        return head.tau * rowwise_cosine(zi, zj), (zi, zj)
    if head.kind == "inner_product":
        return np.einsum("ij,ij->i", zi, zj), (zi, zj)
    h = np.concatenate([zi, zj], axis=1) @ head.mlp["W"] + head.mlp["b"]
    r = relu(h)
    return r @ head.mlp["v"] + head.mlp["c"][0], (zi, zj, h, r)


def _scatter_rows(n, idx, vals):
    """Sum rows of ``vals`` into an (n, d) array at row indices ``idx``."""
    m = len(idx)
    s = sp.csr_matrix((np.ones(m), (idx, np.arange(m))), shape=(n, m))
    return np.asarray(s @ vals)


def _head_backward(head: PredictionHead, n, pairs, cache, ds):
    """Gradients of the logits' loss w.r.t. Z and the head parameters."""
    grads = {}
    if head.kind == "cosine":
        zi, zj = cache
        ni = np.sqrt(np.einsum("ij,ij->i", zi, zi))
        nj = np.sqrt(np.einsum("ij,ij->i", zj, zj))
        ok = (ni > 0) & (nj > 0)
        # zero-norm rows get zero gradient (cosine is defined as 0 there)
        inv_i = np.divide(1.0, ni, out=np.zeros_like(ni), where=ok)
        inv_j = np.divide(1.0, nj, out=np.zeros_like(nj), where=ok)
        c = np.einsum("ij,ij->i", zi, zj) * inv_i * inv_j
        k = head.tau * ds
        gi = (k * inv_i * inv_j)[:, None] * zj - (k * c * inv_i**2)[:, None] * zi
        gj = (k * inv_i * inv_j)[:, None] * zi - (k * c * inv_j**2)[:, None] * zj
    elif head.kind == "inner_product":
        zi, zj = cache
        gi = ds[:, None] * zj
        gj = ds[:, None] * zi
    else:
        zi, zj, h, r = cache
        W, v = head.mlp["W"], head.mlp["v"]
        grads["mlp_v"] = r.T @ ds
        grads["mlp_c"] = np.array([ds.sum()])
        dh = (ds[:, None] * v[None, :]) * (h > 0)
        grads["mlp_W"] = np.concatenate([zi, zj], axis=1).T @ dh
        grads["mlp_b"] = dh.sum(axis=0)
        dcat = dh @ W.T
        h2 = zi.shape[1]
        gi, gj = dcat[:, :h2], dcat[:, h2:]
    dz = _scatter_rows(n, np.concatenate([pairs[:, 0], pairs[:, 1]]), np.concatenate([gi, gj]))
    return dz, grads


def _sddmm(a, b, rows, cols):
    """``(a @ b.T)[rows, cols]`` without forming the dense product."""
    out = np.empty(len(rows))
    for lo in range(0, len(rows), _SDDMM_CHUNK):
        hi = lo + _SDDMM_CHUNK
        out[lo:hi] = np.einsum("ij,ij->i", a[rows[lo:hi]], b[cols[lo:hi]])
    return out


def _encoder_backward(enc, prop: _Propagation, x, cache, dz, want_pairs=False):
    xw, p1, h1, hw = cache
    a_hat = prop.a_hat
    d_hw = a_hat @ dz
    d_w2 = h1.T @ d_hw
    d_p1 = (d_hw @ enc.W2.T) * (p1 > 0)
    d_xw = a_hat @ d_p1
    d_w1 = np.asarray(x.T @ d_xw)
    grads = {"W1": d_w1, "W2": d_w2}
    if not want_pairs:
        return grads, None

    # dL/dA_hat at the pattern: both layers use A_hat
    wp = prop.wp
    i, j = wp.pairs[:, 0], wp.pairs[:, 1]
    g_ij = _sddmm(dz, hw, i, j) + _sddmm(d_p1, xw, i, j)
    g_ji = _sddmm(dz, hw, j, i) + _sddmm(d_p1, xw, j, i)
    diag = np.arange(wp.n)
    g_ii = _sddmm(dz, hw, diag, diag) + _sddmm(d_p1, xw, diag, diag)
    # A_hat_ij = M_ij s_i s_j with M = A + I and s = deg^-1/2, deg = 1 + row sum
    s = prop.s
    w = wp.weights
    g_sym = g_ij + g_ji
    d_s = 2.0 * g_ii * s
    np.add.at(d_s, i, g_sym * w * s[j])
    np.add.at(d_s, j, g_sym * w * s[i])
    d_deg = -0.5 * s**3 * d_s
    d_w = g_sym * s[i] * s[j] + d_deg[i] + d_deg[j]
    return grads, d_w


# ---------------------------------------------------------------- losses


@dataclass
class LossSpec:
    """Which loss to evaluate and on which pairs.

    ``attack``: mean BCE of positives against ``targets`` plus mean BCE of
    negatives against 0. ``privacy``: mean BCE of ``negatives`` (the
    sensitive pairs) against 0.
    """

    kind: str
    positives: np.ndarray = None
    targets: np.ndarray = None
    negatives: np.ndarray = None

    @classmethod
    def attack(cls, positives, targets, negatives):
        return cls("attack", np.asarray(positives, np.int64).reshape(-1, 2),
                   np.asarray(targets, np.float64), np.asarray(negatives, np.int64).reshape(-1, 2))

    @classmethod
    def privacy(cls, sensitive):
        return cls("privacy", negatives=np.asarray(sensitive, np.int64).reshape(-1, 2))


def _loss_terms(spec: LossSpec):
    """(pairs, targets, weight-per-pair) for the BCE terms of a loss spec."""
    neg = spec.negatives if spec.negatives is not None else np.zeros((0, 2), np.int64)
    if spec.kind == "privacy":
        if len(neg) == 0:
            raise ValueError("privacy loss needs at least one sensitive pair")
        return neg, np.zeros(len(neg)), np.full(len(neg), 1.0 / len(neg))
    if spec.kind != "attack":
        raise ValueError(f"unknown loss kind {spec.kind!r}")
    pos = spec.positives
    if pos is None or len(pos) == 0:
        raise ValueError("attack loss needs at least one positive pair")
    pairs = np.concatenate([pos, neg])
    targets = np.concatenate([spec.targets, np.zeros(len(neg))])
    scale = np.concatenate([np.full(len(pos), 1.0 / len(pos)),
                            np.full(len(neg), 1.0 / max(len(neg), 1))])
    return pairs, targets, scale


def _loss_and_grads(model, prop, x, spec, want_pairs=False):
    pairs, targets, scale = _loss_terms(spec)
    z, cache = _encode(model.encoder, prop, x)
    logits, hcache = _head_logits(model.head, z, pairs)
    p = sigmoid(logits)
    loss = float(np.sum(scale * bce(p, targets)))
    ds = scale * (p - targets)
    dz, hgrads = _head_backward(model.head, prop.wp.n, pairs, hcache, ds)
    grads, d_w = _encoder_backward(model.encoder, prop, x, cache, dz, want_pairs)
    grads.update(hgrads)
    return loss, grads, d_w


def _prepare(adj, features):
    wp = as_weighted_pairs(adj)
    return _Propagation(wp), _features_matrix(features, wp.n)


# ---------------------------------------------------------------- public API


def encode(model: AttackModel, adj, features) -> np.ndarray:
    prop, x = _prepare(adj, features)
    return _encode(model.encoder, prop, x)[0]


def predict_link(model: AttackModel, z_i, z_j) -> float:
    z = np.vstack([np.asarray(z_i, np.float64), np.asarray(z_j, np.float64)])
    logit, _ = _head_logits(model.head, z, np.array([[0, 1]]))
    return float(sigmoid(logit)[0])


def predict_pairs(model: AttackModel, z, pairs) -> np.ndarray:
    pairs = np.asarray(pairs, np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return np.zeros(0)
    return sigmoid(_head_logits(model.head, z, pairs)[0])


def infer(model: AttackModel, adj, features, pairs) -> np.ndarray:
    pairs = np.asarray(pairs, np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return np.zeros(0)
    return predict_pairs(model, encode(model, adj, features), pairs)


def attack_loss(model, adj, features, positives, negatives) -> float:
    """Attack BCE loss; ``positives`` is ``(pairs, targets)``."""
    pos_pairs, targets = positives
    prop, x = _prepare(adj, features)
    return _loss_and_grads(model, prop, x, LossSpec.attack(pos_pairs, targets, negatives))[0]


def loss_value(model, adj, features, spec: LossSpec) -> float:
    prop, x = _prepare(adj, features)
    return _loss_and_grads(model, prop, x, spec)[0]


def loss_grad_wrt_params(model, adj, features, spec: LossSpec):
    """(loss, {name: gradient}) for every trainable array of the model."""
    prop, x = _prepare(adj, features)
    loss, grads, _ = _loss_and_grads(model, prop, x, spec)
    return loss, grads


def loss_grad_wrt_pairs(model, wp: WeightedPairs, features, spec: LossSpec, prop=None):
    """(loss, dloss/dw) for every pair of ``wp``, moving both mirrored entries."""
    prop = prop if prop is not None else _Propagation(wp)
    x = _features_matrix(features, wp.n)
    loss, _, d_w = _loss_and_grads(model, prop, x, spec, want_pairs=True)
    if not np.isfinite(d_w).all():
        raise FloatingPointError("non-finite adjacency gradient")
    return loss, d_w


def loss_grad_wrt_adjacency(model, adj, features, spec: LossSpec) -> np.ndarray:
    """Dense symmetric gradient of the loss w.r.t. the adjacency matrix.

    Entry (i, j) is half the derivative of moving the pair weight
    ``A_ij = A_ji`` together, i.e. the symmetric projection of the
    entrywise gradient. The diagonal is zero.
    """
    a = adj.toarray() if sp.issparse(adj) else np.asarray(
        adj.dense() if hasattr(adj, "dense") else adj, dtype=np.float64)
    wp = as_weighted_pairs(a)
    _, d_w = loss_grad_wrt_pairs(model, wp, features, spec)
    g = np.zeros((wp.n, wp.n))
    g[wp.pairs[:, 0], wp.pairs[:, 1]] = d_w / 2.0
    g[wp.pairs[:, 1], wp.pairs[:, 0]] = d_w / 2.0
    return g


# ---------------------------------------------------------------- training


class NegativeSampler:
    """Uniform non-edge pairs, re-drawn each call."""

    def __init__(self, n, edge_keys_sorted):
        self.n = n
        self.forbidden = edge_keys_sorted
        total = n * (n - 1) // 2
        self._free = None
        if total <= 2_000_000:
            i, j = np.triu_indices(n, k=1)
            keys = i.astype(np.int64) * n + j
            self._free = np.setdiff1d(keys, edge_keys_sorted, assume_unique=True)

    def sample(self, count, rng):
        if self._free is not None:
            if count > self._free.size:
                raise ValueError(f"requested {count} negatives, only {self._free.size} exist")
            k = self._free[rng.choice(self._free.size, size=count, replace=False)]
            return np.stack([k // self.n, k % self.n], axis=1)
        return sample_pairs_excluding(self.n, count, self.forbidden, rng)


def train_attack(adj, features, cfg: AttackTrainConfig | None = None) -> AttackModel:
    """Train a freshly initialized attacker on the edges of ``adj``.

    Positives are the current edges (weight > 0) with their weights as
    targets; each epoch draws an equal number of fresh non-edges as
    negatives. The initialization comes from the ``attack_init`` stream of
    ``cfg.seed``, so two calls with equal inputs give identical models.
    """
    cfg = cfg or AttackTrainConfig()
    wp = as_weighted_pairs(adj)
    pos_all, tgt_all = wp.edges()
    if len(pos_all) == 0:
        raise ValueError("cannot train an attack model on an edgeless graph")
    prop = _Propagation(wp)
    x = _features_matrix(features, wp.n)
    model = init_model(x.shape[1], cfg.hidden, cfg.head, stream(cfg.seed, "attack_init"))
    rng = stream(cfg.seed, "attack_train")
    sampler = NegativeSampler(wp.n, wp.edge_keys())
    n_pos = min(len(pos_all), cfg.samples_per_epoch or MAX_POSITIVES)
    opt = Adam(model.params(), lr=cfg.lr)
    for epoch in range(cfg.epochs):
        if n_pos < len(pos_all):
            pick = rng.choice(len(pos_all), size=n_pos, replace=False)
            pos, tgt = pos_all[pick], tgt_all[pick]
        else:
            pos, tgt = pos_all, tgt_all
        neg = sampler.sample(n_pos, rng)
        loss, grads, _ = _loss_and_grads(model, prop, x, LossSpec.attack(pos, tgt, neg))
        if not np.isfinite(loss):
            raise FloatingPointError(f"attack training diverged at epoch {epoch}")
        model.loss_history.append(loss)
        opt.step(grads)
    return model


# ---------------------------------------------------------------- checkpoints

_CKPT_VERSION = 1


def save_model(model: AttackModel, path) -> None:
    arrays = {k: v for k, v in model.params().items()}
    doc = {
        "format": "ppgsl-attack-model",
        "version": _CKPT_VERSION,
        "head": model.head.kind,
        "tau": model.head.tau,
        "arrays": {k: {"shape": list(v.shape), "data": v.reshape(-1).tolist()}
                   for k, v in arrays.items()},
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path) -> AttackModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "ppgsl-attack-model" or doc.get("version") != _CKPT_VERSION:
        raise ValueError(f"{path}: not a version-{_CKPT_VERSION} attack model checkpoint")
    arr = {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"])
           for k, v in doc["arrays"].items()}
    mlp = None
    if doc["head"] == "mlp":
        mlp = {k[4:]: v for k, v in arr.items() if k.startswith("mlp_")}
    return AttackModel(GcnEncoder(arr["W1"], arr["W2"]),
                       PredictionHead(doc["head"], tau=doc["tau"], mlp=mlp))

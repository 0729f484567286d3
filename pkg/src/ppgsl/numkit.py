"""Numerical kernels shared by every model in the package.

Everything here works in float64. Dense matrices are plain 2-D numpy
arrays; sparse matrices are scipy CSR (row-sorted coordinates with a
compressed row index).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

BCE_EPS = 1e-12


def _as_dense(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def matmul(a, b):
    """Dense product with an explicit shape check."""
    a = _as_dense(a, "a")
    b = _as_dense(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch: {a.shape} x {b.shape}")
    return a @ b


def spmm(s, b):
    """Sparse (CSR) times dense."""
    b = np.asarray(b, dtype=np.float64)
    if s.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch: {s.shape} x {b.shape}")
    if not sp.issparse(s):
        return matmul(s, b)
    return np.asarray(s.tocsr() @ b)


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def cosine_similarity(u, v):
    """Cosine of two vectors; 0 when either vector is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        log.debug("cosine_similarity of a zero vector, returning 0")
        return 0.0
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def rowwise_cosine(a, b):
    """Cosine between matching rows of ``a`` and ``b`` (zero rows give 0)."""
    na = np.sqrt(np.einsum("ij,ij->i", a, a))
    nb = np.sqrt(np.einsum("ij,ij->i", b, b))
    denom = na * nb
    dots = np.einsum("ij,ij->i", a, b)
    out = np.zeros_like(dots)
    ok = denom > 0
    out[ok] = dots[ok] / denom[ok]
    return out


def bce(p, target):
    """Binary cross-entropy with a soft target; ``p`` is clamped to [eps, 1-eps]."""
    p = np.clip(np.asarray(p, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    t = np.asarray(target, dtype=np.float64)
    out = -(t * np.log(p) + (1.0 - t) * np.log1p(-p))
    return out if out.ndim else float(out)


@dataclass
class AdamState:
    """Moment buffers for one parameter array."""

    shape: tuple
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.shape = tuple(self.shape)
        if self.m is None:
            self.m = np.zeros(self.shape)
        if self.v is None:
            self.v = np.zeros(self.shape)

    @classmethod
    def like(cls, params, **kw):
        return cls(np.shape(params), **kw)


def adam_step(params, grads, st: AdamState):
    """One bias-corrected Adam update.

    Returns the new parameter array; ``st`` is updated in place and also
    returned for convenience.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != st.shape:
        raise ValueError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, state {st.shape}"
        )
    bad = ~np.isfinite(grads)
    if bad.any():
        idx = tuple(int(i) for i in np.unravel_index(int(np.flatnonzero(bad)[0]), grads.shape))
        raise FloatingPointError(f"non-finite gradient at index {idx}")
    st.step += 1
    st.m = st.beta1 * st.m + (1.0 - st.beta1) * grads
    st.v = st.beta2 * st.v + (1.0 - st.beta2) * grads * grads
    m_hat = st.m / (1.0 - st.beta1**st.step)
    v_hat = st.v / (1.0 - st.beta2**st.step)
    return params - st.lr * m_hat / (np.sqrt(v_hat) + st.eps), st


class Adam:
    """Adam over a dict of named arrays (updated in place)."""

    def __init__(self, params: dict, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.states = {
            k: AdamState(np.shape(v), lr=lr, beta1=beta1, beta2=beta2, eps=eps)
            for k, v in params.items()
        }

    def step(self, grads: dict):
        for k, g in grads.items():
            new, _ = adam_step(self.params[k], g, self.states[k])
            self.params[k][...] = new


def finite_diff_grad(f, x, h=1e-5):
    """Central-difference gradient of scalar ``f`` at ``x`` (any shape)."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite function value near index {i}")
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def max_rel_error(analytic, numeric, floor=1e-7):
    """Largest elementwise |a-b| / max(|a|, |b|, floor)."""
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0

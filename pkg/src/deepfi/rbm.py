"""Restricted Boltzmann machine with sigmoid units and CD-1 training."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .errors import NonFinite, OutOfRange, ShapeMismatch, TooLarge

# Enumeration guard for the brute-force likelihood.
MAX_ENUM_UNITS = 20

SAMPLING_MODES = ("probabilities", "full")

_LO = np.finfo(np.float64).tiny
_HI = np.nextafter(1.0, 0.0)


def logistic(x):
    """Sigmoid clamped to the open interval (0, 1)."""
    return np.clip(expit(x), _LO, _HI)


class RngStream:
    """Seeded source of randomness backed by numpy's PCG64 generator.

    The same seed yields the same draws on every platform numpy supports.
    A stream is stateful and must not be shared between threads.
    """

    algorithm = "PCG64"

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, algorithm={self.algorithm!r})"


@dataclass(frozen=True, eq=False)
class Rbm:
    w: np.ndarray      # (n_visible, n_hidden)
    b_vis: np.ndarray
    b_hid: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64)
        bv = np.array(self.b_vis, dtype=np.float64)
        bh = np.array(self.b_hid, dtype=np.float64)
        if w.ndim != 2 or bv.shape != (w.shape[0],) or bh.shape != (w.shape[1],):
            raise ShapeMismatch(f"inconsistent shapes w={w.shape} b_vis={bv.shape} b_hid={bh.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(bv)) and np.all(np.isfinite(bh))):
            raise NonFinite("rbm parameters must be finite")
        for a in (w, bv, bh):
            a.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b_vis", bv)
        object.__setattr__(self, "b_hid", bh)

    @property
    def n_visible(self) -> int:
        return self.w.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.w.shape[1]

    def transposed(self) -> "Rbm":
        """The same machine with the roles of the two layers swapped."""
        return Rbm(self.w.T, self.b_hid, self.b_vis)

    def __eq__(self, other):
        if not isinstance(other, Rbm):
            return NotImplemented
        return (np.array_equal(self.w, other.w) and np.array_equal(self.b_vis, other.b_vis)
                and np.array_equal(self.b_hid, other.b_hid))


def init_rbm(n_visible: int, n_hidden: int, rng: RngStream) -> Rbm:
    """Weights ``0.1 * N(0, 1)``, all biases zero."""
    w = 0.1 * rng.generator.standard_normal((n_visible, n_hidden))
    return Rbm(w, np.zeros(n_visible), np.zeros(n_hidden))


def hidden_activation(rbm: Rbm, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != rbm.n_visible:
        raise ShapeMismatch(f"visible vector has {v.shape[-1]} entries, rbm expects {rbm.n_visible}")
    return logistic(v @ rbm.w + rbm.b_hid)


def visible_activation(rbm: Rbm, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != rbm.n_hidden:
        raise ShapeMismatch(f"hidden vector has {h.shape[-1]} entries, rbm expects {rbm.n_hidden}")
    return logistic(h @ rbm.w.T + rbm.b_vis)


def sample_bernoulli(p, rng: RngStream) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if np.any(~(p >= 0.0)) or np.any(~(p <= 1.0)):
        raise OutOfRange("probabilities must lie in [0, 1]")
    return (rng.generator.random(p.shape) < p).astype(np.float64)


def _cd1_inplace(w, b_vis, b_hid, v0, alpha, gen, sampling):
    """One CD-1 step applied to the arrays in place."""
    h = logistic(v0 @ w + b_hid)
    h_s = (gen.random(h.shape) < h).astype(np.float64)
    v_hat = logistic(w @ h_s + b_vis)
    if sampling == "full":
        v_hat = (gen.random(v_hat.shape) < v_hat).astype(np.float64)
        h_hat = logistic(v_hat @ w + b_hid)
        h_hat = (gen.random(h_hat.shape) < h_hat).astype(np.float64)
        h = h_s
    else:
        h_hat = logistic(v_hat @ w + b_hid)
    w += alpha * (np.outer(v0, h) - np.outer(v_hat, h_hat))
    b_hid += alpha * (h - h_hat)
    b_vis += alpha * (v0 - v_hat)


def cd1_update(rbm: Rbm, v0, alpha: float, rng: RngStream, sampling: str = "probabilities") -> Rbm:
    """Return the machine after one contrastive-divergence step on ``v0``.

    With ``sampling="probabilities"`` only the hidden state that drives the
    reconstruction is sampled; ``"full"`` samples every layer.
    """
    if sampling not in SAMPLING_MODES:
        raise ValueError(f"unknown sampling mode {sampling!r}")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    v0 = np.asarray(v0, dtype=np.float64)
    if v0.shape != (rbm.n_visible,):
        raise ShapeMismatch(f"v0 has shape {v0.shape}, expected ({rbm.n_visible},)")
    w, bv, bh = rbm.w.copy(), rbm.b_vis.copy(), rbm.b_hid.copy()
    _cd1_inplace(w, bv, bh, v0, alpha, rng.generator, sampling)
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(bv)) and np.all(np.isfinite(bh))):
        raise NonFinite("CD-1 update produced non-finite parameters")
    return Rbm(w, bv, bh)


def _binary_states(n: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=n))).reshape(2 ** n, n)


def exact_loglik(rbm: Rbm, v) -> float:
    """log Pr(v) by enumerating every joint binary state (small machines only)."""
    if rbm.n_visible + rbm.n_hidden > MAX_ENUM_UNITS:
        raise TooLarge(f"{rbm.n_visible + rbm.n_hidden} units exceeds enumeration guard {MAX_ENUM_UNITS}")
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (rbm.n_visible,):
        raise ShapeMismatch(f"v has shape {v.shape}, expected ({rbm.n_visible},)")
    vs = _binary_states(rbm.n_visible)
    hs = _binary_states(rbm.n_hidden)
    # -E(v, h) for every pair of states
    neg_e = (vs @ rbm.b_vis)[:, None] + (hs @ rbm.b_hid)[None, :] + vs @ rbm.w @ hs.T
    log_z = logsumexp(neg_e)
    neg_e_v = v @ rbm.b_vis + hs @ rbm.b_hid + v @ rbm.w @ hs.T
    return float(logsumexp(neg_e_v) - log_z)

"""Online location estimation by Bayesian fusion of reconstruction likelihoods.

Each reference location's autoencoder scores the test packets with a
radial-basis likelihood ``exp(-d / (lambda * sigma))``, where ``d`` is the
distance between a packet and its reconstruction. The posterior over
locations (uniform prior) weights the reference coordinates.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from . import csi
from .csi import DispersionStats
from .deepnet import FingerprintModel, reconstruct
from .errors import AllZeroLikelihood, DegenerateScale, EmptyDb, EmptyInput, ShapeMismatch

DISTANCES = ("l1", "l2")
SIGMA_MODES = ("std", "var")


@dataclass(frozen=True)
class BatchConfig:
    batch_size: int = 10
    lambda_sigma_floor: float = 1e-6
    distance: str = "l1"
    sigma_mode: str = "std"
    bias_forward: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lambda_sigma_floor <= 0:
            raise ValueError("lambda_sigma_floor must be positive")
        if self.distance not in DISTANCES:
            raise ValueError(f"distance must be one of {DISTANCES}")
        if self.sigma_mode not in SIGMA_MODES:
            raise ValueError(f"sigma_mode must be one of {SIGMA_MODES}")


@dataclass
class FingerprintDatabase:
    entries: List[FingerprintModel]
    grid_m: float = 0.5

    def __post_init__(self):
        self.entries = list(self.entries)
        if not self.entries:
            raise EmptyDb("fingerprint database needs at least one location")
        first = self.entries[0]
        for m in self.entries[1:]:
            if m.shape != first.shape or m.antennas != first.antennas:
                raise ShapeMismatch("all models in a database must share shape and antennas")
        if len({m.location for m in self.entries}) != len(self.entries):
            raise ValueError("reference locations must be pairwise distinct")

    @property
    def locations(self) -> np.ndarray:
        return np.array([m.location for m in self.entries], dtype=np.float64)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        if not isinstance(other, FingerprintDatabase):
            return NotImplemented
        return (self.grid_m == other.grid_m and len(self) == len(other)
                and all(a == b for a, b in zip(self.entries, other.entries)))


@dataclass
class LocationEstimate:
    xy: Tuple[float, float]
    posterior: np.ndarray
    likelihoods: np.ndarray
    log_likelihoods: Optional[np.ndarray] = None
    degenerate: bool = False


def rbf_scale(stats: DispersionStats, cfg: BatchConfig) -> float:
    """The ``lambda * sigma`` denominator; ``sigma`` is squared in ``var`` mode."""
    sigma = stats.sigma ** 2 if cfg.sigma_mode == "var" else stats.sigma
    scale = stats.lambda_ * sigma
    if not scale >= cfg.lambda_sigma_floor:
        raise DegenerateScale(f"lambda*sigma = {scale:g} is below the floor {cfg.lambda_sigma_floor:g}")
    return scale


def reconstruction_distance(v: np.ndarray, v_hat: np.ndarray, distance: str = "l1") -> np.ndarray:
    """Per-row distance between packets and their reconstructions."""
    diff = np.abs(np.asarray(v) - np.asarray(v_hat))
    if distance == "l2":
        return np.sqrt(np.sum(diff * diff, axis=-1))
    return np.sum(diff, axis=-1)


def packet_log_rbfs(model: FingerprintModel, packets: np.ndarray, stats: DispersionStats,
                    cfg: BatchConfig = BatchConfig()) -> np.ndarray:
    """``-d / (lambda * sigma)`` for each packet, reconstructing ``batch_size`` at a time."""
    v = np.asarray(packets, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
    if v.shape[0] == 0:
        raise EmptyInput("no packets")
    scale = rbf_scale(stats, cfg)
    out = np.empty(v.shape[0])
    for start in range(0, v.shape[0], cfg.batch_size):
        batch = v[start:start + cfg.batch_size]
        v_hat = reconstruct(model, batch, bias=cfg.bias_forward)
        out[start:start + len(batch)] = -reconstruction_distance(batch, v_hat, cfg.distance) / scale
    return out


def packet_rbf(model: FingerprintModel, v, stats: DispersionStats, cfg: BatchConfig = BatchConfig()) -> float:
    return float(np.exp(packet_log_rbfs(model, np.asarray(v)[None, :], stats, cfg)[0]))


def location_log_likelihood(model: FingerprintModel, packets, stats: DispersionStats,
                            cfg: BatchConfig = BatchConfig()) -> float:
    """log of the mean RBF over all packets; immune to underflow."""
    log_rbf = packet_log_rbfs(model, packets, stats, cfg)
    return float(logsumexp(log_rbf) - np.log(len(log_rbf)))


def location_likelihood(model: FingerprintModel, packets, stats: DispersionStats,
                        cfg: BatchConfig = BatchConfig()) -> float:
    """Mean RBF over the packets. Batching changes only how reconstruction is grouped."""
    return float(np.mean(np.exp(packet_log_rbfs(model, packets, stats, cfg))))


def _uniform_fallback(n: int) -> np.ndarray:
    warnings.warn("all location likelihoods are zero; using a uniform posterior",
                  AllZeroLikelihood, stacklevel=3)
    return np.full(n, 1.0 / n)


def posterior(likelihoods) -> np.ndarray:
    """Normalize likelihoods under a uniform prior."""
    lik = np.asarray(likelihoods, dtype=np.float64)
    if lik.size == 0:
        raise EmptyInput("no likelihoods")
    if np.any(lik < 0) or not np.all(np.isfinite(lik)):
        raise ValueError("likelihoods must be finite and non-negative")
    total = lik.sum()
    if total <= 0:
        return _uniform_fallback(lik.size)
    return lik / total


def posterior_from_log(log_likelihoods) -> Tuple[np.ndarray, bool]:
    """Posterior from log-likelihoods after subtracting the maximum.

    Returns ``(posterior, degenerate)``; degenerate means every entry was -inf.
    """
    ll = np.asarray(log_likelihoods, dtype=np.float64)
    if ll.size == 0:
        raise EmptyInput("no likelihoods")
    top = np.max(ll)
    if not np.isfinite(top):
        return _uniform_fallback(ll.size), True
    w = np.exp(ll - top)
    return w / w.sum(), False


def fuse(locations, post) -> Tuple[float, float]:
    """Posterior-weighted average of reference coordinates."""
    xy = np.asarray(post) @ np.asarray(locations, dtype=np.float64)
    return (float(xy[0]), float(xy[1]))


def packet_dispersion(raw: np.ndarray, antennas: Sequence[int] = csi.ALL_ANTENNAS) -> DispersionStats:
    """Dispersion of the test packets, min-max normalized over their own range.

    Computed once per estimate and shared by every reference model.
    """
    x = raw[:, csi.antenna_columns(antennas)]
    return csi.dispersion(csi.normalize(x, csi.fit_normalization(x)))


def _model_log_likelihood(model: FingerprintModel, raw: np.ndarray, stats: DispersionStats,
                          cfg: BatchConfig) -> float:
    v = csi.normalize(raw[:, csi.antenna_columns(model.antennas)], model.norm)
    return location_log_likelihood(model, v, stats, cfg)


def estimate(db: FingerprintDatabase, raw_packets: Sequence[csi.CsiPacket],
             cfg: BatchConfig = BatchConfig(), jobs: int = 1) -> LocationEstimate:
    """Locate a device from its raw packets against every reference model.

    Each model normalizes the packets with its own stored parameters; the
    RBF scale comes from ``packet_dispersion`` and is common to all models. With
    ``jobs > 1`` models are scored on a thread pool; results are collected in
    database order, so the estimate does not depend on ``jobs``.
    """
    raw = csi.as_matrix(raw_packets)
    if raw.shape[0] == 0:
        raise EmptyInput("no packets to localize")
    stats = packet_dispersion(raw, db.entries[0].antennas)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            ll = list(pool.map(lambda m: _model_log_likelihood(m, raw, stats, cfg), db.entries))
    else:
        ll = [_model_log_likelihood(m, raw, stats, cfg) for m in db.entries]
    ll = np.array(ll)
    post, degenerate = posterior_from_log(ll)
    return LocationEstimate(xy=fuse(db.locations, post), posterior=post,
                            likelihoods=np.exp(ll), log_likelihoods=ll, degenerate=degenerate)

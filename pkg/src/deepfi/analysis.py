"""Localization metrics and CSI statistics (error CDFs, stability, clusters, correlation)."""
from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from . import csi
from .errors import EmptyInput, LengthMismatch

DEFAULT_CLUSTER_TOLERANCE = 0.15


def mean_sum_error(estimates: Sequence[Tuple[float, float]], truths: Sequence[Tuple[float, float]]) -> float:
    """Mean Euclidean distance between estimated and true positions, in meters."""
    if len(estimates) != len(truths):
        raise LengthMismatch(f"{len(estimates)} estimates vs {len(truths)} truths")
    if not len(estimates):
        raise EmptyInput("no estimates")
    e = np.asarray(estimates, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    return float(np.mean(np.hypot(e[:, 0] - t[:, 0], e[:, 1] - t[:, 1])))


def error_cdf(errors: Sequence[float]) -> List[Tuple[float, float]]:
    """Empirical CDF as (value, fraction <= value) at each distinct value."""
    x = np.sort(np.asarray(errors, dtype=np.float64))
    if x.size == 0:
        return []
    values, counts = np.unique(x, return_counts=True)
    fractions = np.cumsum(counts) / x.size
    return [(float(v), float(f)) for v, f in zip(values, fractions)]


def stability_ratios(packets, feature: str = "csi") -> np.ndarray:
    """Per-dimension std/mean over the packets of one location.

    ``feature="rss"`` measures RSS converted to linear amplitude
    (``10 ** (dBm / 20)``), so the ratio is comparable with CSI amplitudes.
    """
    if feature == "csi":
        x = csi.as_matrix(packets)
    elif feature == "rss":
        rss = np.array([p.rss for p in packets], dtype=np.float64)
        x = (10.0 ** (rss / 20.0))[:, None]
    else:
        raise ValueError(f"unknown feature {feature!r}")
    if x.shape[0] == 0:
        raise EmptyInput("no packets")
    mean = x.mean(axis=0)
    return x.std(axis=0) / mean


def stability_cdf(per_location_packets, feature: str = "csi") -> List[Tuple[float, float]]:
    """CDF of std/mean ratios pooled over every dimension of every location."""
    ratios = np.concatenate([stability_ratios(p, feature) for p in per_location_packets])
    return error_cdf(ratios)


def fraction_below(cdf: List[Tuple[float, float]], threshold: float) -> float:
    below = [f for v, f in cdf if v < threshold]
    return below[-1] if below else 0.0


def count_clusters(amplitudes, tolerance: float = DEFAULT_CLUSTER_TOLERANCE) -> int:
    """Groups of similar amplitudes: sort, then split wherever a gap exceeds
    ``tolerance`` times the full range."""
    a = np.sort(np.asarray(amplitudes, dtype=np.float64))
    span = a[-1] - a[0]
    if span <= 0:
        return 1
    return int(1 + np.count_nonzero(np.diff(a) > tolerance * span))


def correlation(v1, v2) -> float:
    """Pearson correlation coefficient."""
    a = np.asarray(v1, dtype=np.float64)
    b = np.asarray(v2, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"shapes {a.shape} and {b.shape} differ")
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt(np.sum(da * da) * np.sum(db * db))
    if denom == 0:
        raise ValueError("correlation undefined for a constant vector")
    return float(np.clip(np.sum(da * db) / denom, -1.0, 1.0))

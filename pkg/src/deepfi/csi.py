"""CSI packet types and the preprocessing shared by training and localization.

Amplitudes are stored flat with index ``30 * antenna + subcarrier``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import DegenerateRange, EmptyInput, ShapeMismatch, ZeroSigma

N_ANTENNAS = 3
N_SUBCARRIERS = 30
N_CSI = N_ANTENNAS * N_SUBCARRIERS
ALL_ANTENNAS = (0, 1, 2)

# Keeps normalized values strictly inside (0, 1) so no sigmoid unit saturates.
CLAMP_EPS = 1e-6


@dataclass(frozen=True, eq=False)
class CsiPacket:
    """One packet reception: 90 linear CSI amplitudes plus optional RSS (dBm)."""

    amplitudes: np.ndarray
    rss: Optional[float] = None
    timestamp: Optional[int] = None

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.float64)
        if amps.shape != (N_CSI,):
            raise ShapeMismatch(f"expected {N_CSI} amplitudes, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)) or np.any(amps < 0):
            raise ValueError("amplitudes must be finite and non-negative")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def antenna(self, a: int) -> np.ndarray:
        return self.amplitudes[N_SUBCARRIERS * a:N_SUBCARRIERS * (a + 1)]

    def __eq__(self, other):
        if not isinstance(other, CsiPacket):
            return NotImplemented
        return (np.array_equal(self.amplitudes, other.amplitudes)
                and self.rss == other.rss and self.timestamp == other.timestamp)


@dataclass(frozen=True)
class NormalizationParams:
    min_amp: float
    max_amp: float

    def __post_init__(self):
        if not self.max_amp > self.min_amp:
            raise DegenerateRange(f"max_amp ({self.max_amp}) must exceed min_amp ({self.min_amp})")


@dataclass(frozen=True)
class DispersionStats:
    sigma: float
    mu: float
    lambda_: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "lambda_", self.sigma / self.mu)


PacketsLike = Union[Sequence[CsiPacket], np.ndarray]


def antenna_columns(antennas: Iterable[int] = ALL_ANTENNAS) -> np.ndarray:
    """Flat column indices for the given antennas, in antenna order."""
    cols = [np.arange(N_SUBCARRIERS) + N_SUBCARRIERS * a for a in antennas]
    if not cols:
        raise ValueError("at least one antenna required")
    return np.concatenate(cols)


def as_matrix(packets: PacketsLike, antennas: Iterable[int] = ALL_ANTENNAS) -> np.ndarray:
    """Stack packets into an ``(n, 30 * len(antennas))`` float array.

    Arrays pass through untouched (they are assumed to already hold the
    selected antennas); packet sequences are stacked and column-selected.
    """
    if isinstance(packets, np.ndarray):
        x = np.asarray(packets, dtype=np.float64)
        return x[None, :] if x.ndim == 1 else x
    packets = list(packets)
    if not packets:
        return np.empty((0, len(antenna_columns(antennas))))
    x = np.stack([p.amplitudes for p in packets])
    antennas = tuple(antennas)
    if antennas != ALL_ANTENNAS:
        x = x[:, antenna_columns(antennas)]
    return x


def fit_normalization(packets: PacketsLike, antennas: Iterable[int] = ALL_ANTENNAS) -> NormalizationParams:
    x = as_matrix(packets, antennas)
    if x.size == 0:
        raise EmptyInput("no packets to fit normalization on")
    return NormalizationParams(float(x.min()), float(x.max()))


def normalize(packets: Union[CsiPacket, PacketsLike], params: NormalizationParams,
              antennas: Iterable[int] = ALL_ANTENNAS) -> np.ndarray:
    """Min-max map into (0, 1), clamped to ``[CLAMP_EPS, 1 - CLAMP_EPS]``.

    Test values outside the training range clamp instead of raising.
    """
    if isinstance(packets, CsiPacket):
        x = as_matrix([packets], antennas)[0]
    else:
        x = as_matrix(packets, antennas)
    v = (x - params.min_amp) / (params.max_amp - params.min_amp)
    return np.clip(v, CLAMP_EPS, 1.0 - CLAMP_EPS)


def denormalize(v: np.ndarray, params: NormalizationParams) -> np.ndarray:
    return np.asarray(v) * (params.max_amp - params.min_amp) + params.min_amp


def dispersion(normalized: Union[np.ndarray, Sequence[np.ndarray]]) -> DispersionStats:
    """Population std, mean and coefficient of variation over every entry."""
    x = np.asarray(normalized, dtype=np.float64)
    if x.size == 0:
        raise EmptyInput("no normalized packets")
    mu = float(x.mean())
    sigma = float(x.std())
    if sigma == 0.0:
        raise ZeroSigma("normalized data has zero spread")
    return DispersionStats(sigma=sigma, mu=mu)

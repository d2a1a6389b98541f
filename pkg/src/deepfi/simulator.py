"""Synthetic indoor CSI/RSS generator with ground truth.

The channel is a sum of multipath components from one access point: a
line-of-sight ray plus rays bounced off fixed scatterers. Each path's delay
is geometric, which gives frequency selectivity across the 30 subcarriers.
Carrier phase is replaced by smooth random fields (random Fourier features)
so that responses decorrelate over tens of centimeters rather than half a
wavelength. Per-antenna fields make the three antennas differ. Finally the
30-subcarrier response is flattened into k contiguous bands, k drawn per
location, to produce the cluster structure seen in measured CSI.

All constants here are calibration choices, not physics.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import csi
from .csi import CsiPacket
from .errors import OutOfRoom
from .rbm import RngStream
from .seeding import location_seed, mix, quantize

SPEED_OF_LIGHT = 299_792_458.0
SUBCARRIER_SPACING_HZ = 312.5e3
# Intel 5300 reports 30 of the 56 subcarriers of a 20 MHz channel.
SUBCARRIER_INDEX = np.linspace(-28, 28, csi.N_SUBCARRIERS)
SUBCARRIER_FREQ_HZ = SUBCARRIER_INDEX * SUBCARRIER_SPACING_HZ

N_FOURIER = 32
AMPLITUDE_SCALE = 60.0
RSS_AT_1M_DBM = -30.0
# Relative weight of a cluster count k, for k = 1, 2, 3, ...; truncated to n_clusters_range.
CLUSTER_COUNT_WEIGHTS = (0.12, 0.34, 0.30, 0.14, 0.06, 0.04)
MIN_BAND_WIDTH = 2

LAYOUTS = ("living_room", "laboratory", "custom")


@dataclass(frozen=True)
class SimScenario:
    room_w_m: float
    room_h_m: float
    ap_xy: Tuple[float, float]
    grid_m: float = 0.5
    n_clusters_range: Tuple[int, int] = (1, 6)
    noise_std: float = 0.05
    antenna_offsets: Tuple[int, int, int] = (11, 23, 37)
    rss_path_loss_exp: float = 3.0
    rss_noise_db: float = 2.0
    rss_shadow_db: float = 3.0
    rss_session_db: float = 2.5
    n_paths: int = 7
    los_gain: float = 1.0
    coherence_m: float = 3.0
    antenna_diversity: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.room_w_m <= 0 or self.room_h_m <= 0:
            raise ValueError("room dimensions must be positive")
        if self.grid_m <= 0:
            raise ValueError("grid_m must be positive")
        lo, hi = self.n_clusters_range
        if not (1 <= lo <= hi <= csi.N_SUBCARRIERS):
            raise ValueError("n_clusters_range must lie within [1, 30]")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if len(self.antenna_offsets) != csi.N_ANTENNAS:
            raise ValueError("need one offset seed per antenna")
        object.__setattr__(self, "ap_xy", (float(self.ap_xy[0]), float(self.ap_xy[1])))
        object.__setattr__(self, "n_clusters_range", (int(lo), int(hi)))
        object.__setattr__(self, "antenna_offsets", tuple(int(a) for a in self.antenna_offsets))

    @classmethod
    def living_room(cls, **overrides) -> "SimScenario":
        """4 x 7 m, mostly line of sight, access point at one end."""
        params = dict(room_w_m=4.0, room_h_m=7.0, ap_xy=(2.0, 0.3))
        params.update(overrides)
        return cls(**params)

    @classmethod
    def laboratory(cls, **overrides) -> "SimScenario":
        """6 x 9 m, cluttered: weak line of sight and more scatterers."""
        params = dict(room_w_m=6.0, room_h_m=9.0, ap_xy=(0.5, 0.5), n_paths=10,
                      los_gain=0.35, coherence_m=2.0)
        params.update(overrides)
        return cls(**params)

    def contains(self, xy) -> bool:
        x, y = xy
        return 0.0 < x < self.room_w_m and 0.0 < y < self.room_h_m

    def to_meta(self) -> str:
        """``key=value`` lines recording every field."""
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, (tuple, list)):
                value = ",".join(str(v) for v in value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


@dataclass
class SimPoint:
    x: float
    y: float
    packets: List[CsiPacket] = field(default_factory=list)

    @property
    def xy(self) -> Tuple[float, float]:
        return (self.x, self.y)


@dataclass
class GroundTruthSet:
    train_points: List[SimPoint]
    test_points: List[SimPoint]


class _Field:
    """Smooth zero-mean, unit-variance random field over the floor plane."""

    def __init__(self, gen: np.random.Generator, length_m: float):
        self.omega = gen.standard_normal((N_FOURIER, 2)) / length_m
        self.phase = gen.uniform(0.0, 2 * np.pi, N_FOURIER)

    def __call__(self, xy) -> float:
        arg = self.omega @ np.asarray(xy, dtype=np.float64) + self.phase
        return float(np.sqrt(2.0 / N_FOURIER) * np.sum(np.cos(arg)))


class _Channel:
    def __init__(self, sc: SimScenario):
        gen = np.random.Generator(np.random.PCG64(mix(sc.seed, 0xC4A7)))
        n_scat = sc.n_paths - 1
        margin = 1.0
        self.scatterers = np.column_stack([
            gen.uniform(-margin, sc.room_w_m + margin, n_scat),
            gen.uniform(-margin, sc.room_h_m + margin, n_scat),
        ])
        self.reflect = np.concatenate([[sc.los_gain], gen.uniform(0.3, 0.9, n_scat)])
        self.phase_fields = [_Field(gen, sc.coherence_m) for _ in range(sc.n_paths)]
        self.gain_fields = [_Field(gen, 2 * sc.coherence_m) for _ in range(sc.n_paths)]
        self.shadow = _Field(gen, 2.0)
        self.antenna_phase = []
        self.antenna_gain = []
        for offset in sc.antenna_offsets:
            agen = np.random.Generator(np.random.PCG64(mix(sc.seed, 0xA7E, offset)))
            self.antenna_phase.append([_Field(agen, sc.coherence_m) for _ in range(sc.n_paths)])
            self.antenna_gain.append(1.0 + 0.15 * agen.standard_normal(sc.n_paths))

    def path_lengths(self, sc: SimScenario, xy) -> np.ndarray:
        ap = np.asarray(sc.ap_xy)
        rx = np.asarray(xy, dtype=np.float64)
        los = np.linalg.norm(rx - ap)
        bounced = (np.linalg.norm(self.scatterers - ap, axis=1)
                   + np.linalg.norm(self.scatterers - rx, axis=1))
        return np.maximum(np.concatenate([[los], bounced]), 0.1)


@lru_cache(maxsize=32)
def _channel(sc: SimScenario) -> _Channel:
    return _Channel(sc)


def _check_room(sc: SimScenario, xy):
    if not sc.contains(xy):
        raise OutOfRoom(f"point {tuple(xy)} lies outside the {sc.room_w_m} x {sc.room_h_m} m room")


def cluster_count(sc: SimScenario, xy, antenna: int) -> int:
    """Number of amplitude bands at this location, hashed from 1 cm quantized coordinates."""
    lo, hi = sc.n_clusters_range
    ks = np.arange(lo, hi + 1)
    weights = np.array([CLUSTER_COUNT_WEIGHTS[k - 1] if k <= len(CLUSTER_COUNT_WEIGHTS) else 0.01
                        for k in ks])
    h = mix(sc.seed, quantize(xy[0]), quantize(xy[1]), antenna, 0xB1)
    u = (h >> 11) / float(1 << 53)
    return int(ks[np.searchsorted(np.cumsum(weights) / weights.sum(), u, side="right")])


def _band_edges(raw: np.ndarray, k: int) -> List[int]:
    """Cut points at the k-1 largest jumps, keeping every band at least MIN_BAND_WIDTH wide."""
    jumps = np.abs(np.diff(raw))
    cuts: List[int] = []
    for idx in np.argsort(-jumps, kind="stable"):
        cut = int(idx) + 1
        if len(cuts) == k - 1:
            break
        bounds = sorted(cuts + [0, len(raw)])
        if all(abs(cut - b) >= MIN_BAND_WIDTH for b in bounds):
            cuts.append(cut)
    return sorted(cuts)


def multipath_response(sc: SimScenario, xy, antenna: int) -> np.ndarray:
    """Unbanded amplitude of the summed multipath components on the 30 subcarriers."""
    _check_room(sc, xy)
    ch = _channel(sc)
    lengths = ch.path_lengths(sc, xy)
    delays = lengths / SPEED_OF_LIGHT
    gains = (ch.reflect * ch.antenna_gain[antenna] / lengths
             * np.exp(0.3 * np.array([f(xy) for f in ch.gain_fields])))
    phases = np.pi * (np.array([f(xy) for f in ch.phase_fields])
                      + sc.antenna_diversity * np.array([f(xy) for f in ch.antenna_phase[antenna]]))
    h = (gains[None, :] * np.exp(1j * (phases[None, :]
                                       - 2 * np.pi * SUBCARRIER_FREQ_HZ[:, None] * delays[None, :])))
    return AMPLITUDE_SCALE * np.abs(h.sum(axis=1))


def channel_response(sc: SimScenario, xy, antenna: int) -> np.ndarray:
    """Noise-free 30-subcarrier amplitudes of one antenna, grouped into flat bands."""
    if antenna not in range(csi.N_ANTENNAS):
        raise ValueError(f"antenna must be 0..2, got {antenna}")
    raw = multipath_response(sc, xy, antenna)
    k = cluster_count(sc, xy, antenna)
    out = np.empty_like(raw)
    bounds = [0] + _band_edges(raw, k) + [len(raw)]
    for a, b in zip(bounds, bounds[1:]):
        out[a:b] = raw[a:b].mean()
    return np.maximum(out, 1e-3)


def base_response(sc: SimScenario, xy) -> np.ndarray:
    """Noise-free 90-entry amplitude vector (all antennas)."""
    return np.concatenate([channel_response(sc, xy, a) for a in range(csi.N_ANTENNAS)])


def mean_rss(sc: SimScenario, xy) -> float:
    """Log-distance path loss plus slow shadowing, in dBm."""
    _check_room(sc, xy)
    d = max(float(np.linalg.norm(np.asarray(xy) - np.asarray(sc.ap_xy))), 0.1)
    shadow = sc.rss_shadow_db * _channel(sc).shadow(xy)
    return RSS_AT_1M_DBM - 10.0 * sc.rss_path_loss_exp * np.log10(d) + shadow


def emit_packets(sc: SimScenario, xy, n: int, rng: RngStream) -> List[CsiPacket]:
    """``n`` packet receptions at ``xy``: multiplicative amplitude noise and noisy RSS.

    One call is one collection session: RSS carries a session-wide offset
    (slow drift) on top of per-packet noise, so averaging packets does not
    remove it.
    """
    base = base_response(sc, xy)
    gen = rng.generator
    rss0 = mean_rss(sc, xy) + sc.rss_session_db * gen.standard_normal()
    noise = gen.standard_normal((n, csi.N_CSI))
    rss_noise = gen.standard_normal(n)
    amps = np.maximum(base * (1.0 + sc.noise_std * noise), 1e-3 * base)
    return [CsiPacket(amps[i], rss=float(rss0 + sc.rss_noise_db * rss_noise[i]), timestamp=i)
            for i in range(n)]


def emit_packet(sc: SimScenario, xy, rng: RngStream) -> CsiPacket:
    return emit_packets(sc, xy, 1, rng)[0]


def _centered_grid(sc: SimScenario, nx: int, ny: int):
    cx, cy = sc.room_w_m / 2, sc.room_h_m / 2
    xs = cx + (np.arange(nx) - (nx - 1) / 2) * sc.grid_m
    ys = cy + (np.arange(ny) - (ny - 1) / 2) * sc.grid_m
    return xs, ys


def layout_points(sc: SimScenario, layout: str, n_custom_test: int = 12):
    """Train and test coordinates for a layout preset."""
    if layout == "living_room":
        xs, ys = _centered_grid(sc, 5, 10)
        grid = [(float(x), float(y)) for x in xs for y in ys]
        # Two lines of six test positions.
        test = [(float(xs[i]), float(ys[j])) for i in (1, 3) for j in range(2, 8)]
        train = [p for p in grid if p not in test]
    elif layout == "laboratory":
        xs, ys = _centered_grid(sc, 5, 10)
        train = [(float(x), float(y)) for x in xs for y in ys]
        centers = [(float(x + sc.grid_m / 2), float(y + sc.grid_m / 2)) for x in xs[:-1] for y in ys[:-1]]
        gen = np.random.Generator(np.random.PCG64(mix(sc.seed, 0x7E57)))
        pick = np.sort(gen.permutation(len(centers))[:30])
        test = [centers[i] for i in pick]
    elif layout == "custom":
        nx = int(np.floor(sc.room_w_m / sc.grid_m))
        ny = int(np.floor(sc.room_h_m / sc.grid_m))
        xs, ys = _centered_grid(sc, nx, ny)
        train = [(float(x), float(y)) for x in xs for y in ys]
        gen = np.random.Generator(np.random.PCG64(mix(sc.seed, 0x7E57)))
        lo = np.array([xs[0], ys[0]])
        hi = np.array([xs[-1], ys[-1]])
        test = []
        while len(test) < n_custom_test:
            p = tuple(float(c) for c in np.round(gen.uniform(lo, hi), 2))
            if p not in train and p not in test:
                test.append(p)
    else:
        raise ValueError(f"unknown layout {layout!r}; choose from {LAYOUTS}")
    for p in train + test:
        _check_room(sc, p)
    return train, test


DEFAULT_PACKETS = {
    "living_room": (500, 100),
    "laboratory": (1000, 100),
    "custom": (500, 100),
}


def generate(sc: SimScenario, layout: str, n_train_packets: Optional[int] = None,
             n_test_packets: Optional[int] = None) -> GroundTruthSet:
    """Emit packets at every train and test point of the layout."""
    train_xy, test_xy = layout_points(sc, layout)
    n_train_default, n_test_default = DEFAULT_PACKETS[layout]
    n_train = n_train_default if n_train_packets is None else n_train_packets
    n_test = n_test_default if n_test_packets is None else n_test_packets

    def emit(xy, n, role):
        rng = RngStream(location_seed(sc.seed, xy, role))
        return SimPoint(xy[0], xy[1], emit_packets(sc, xy, n, rng))

    return GroundTruthSet(
        train_points=[emit(xy, n_train, 1) for xy in train_xy],
        test_points=[emit(xy, n_test, 2) for xy in test_xy],
    )

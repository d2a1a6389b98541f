"""Stable 64-bit hashing used to derive per-location seeds."""
from __future__ import annotations

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def mix(*values: int) -> int:
    """Fold integers (any sign) into one well-mixed unsigned 64-bit value."""
    h = 0x6A09E667F3BCC908
    for v in values:
        h = splitmix64(h ^ (int(v) & _MASK))
    return h


def quantize(coord: float, quantum: float = 0.01) -> int:
    """Coordinate in meters to an integer number of quanta (1 cm default)."""
    return int(round(coord / quantum))


def location_seed(seed: int, xy, *extra: int) -> int:
    """Seed that depends only on the base seed and the (quantized) location."""
    return mix(seed, quantize(xy[0]), quantize(xy[1]), *extra)

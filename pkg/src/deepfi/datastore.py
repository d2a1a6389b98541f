"""Fingerprint database (binary) and packet dataset (CSV) persistence.

Database layout, all little-endian::

    header   magic "CSIFPDB1" | version u16 | n_locations u32 | k1..k4 u32 |
             n_in u32 | flags u32 | grid_m f64
    per loc  x, y, min_amp, max_amp f64 |
             enc_w[0..3], dec_w[0..3], enc_b[0..3], dec_b[0..3] as f64, row-major

Flags: bit 0 l2 distance, bit 1 sigma as variance, bit 2 biases dropped in
the forward pass, bits 8-10 antenna mask.
"""
from __future__ import annotations

import csv
import os
import struct
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import csi
from .csi import CsiPacket, NormalizationParams
from .deepnet import FingerprintModel, NetShape
from .errors import (BadMagic, DatasetFormatError, EmptyDb, NonFiniteWeight, ShapeMismatch,
                     Truncated, VersionMismatch)
from .locator import BatchConfig, FingerprintDatabase

MAGIC = b"CSIFPDB1"
VERSION = 1
HEADER = struct.Struct("<8sHI4IIId")

FLAG_L2 = 1 << 0
FLAG_SIGMA_VAR = 1 << 1
FLAG_NO_BIAS_FORWARD = 1 << 2
ANTENNA_SHIFT = 8


@dataclass(frozen=True)
class DbFileHeader:
    magic: bytes
    version: int
    n_locations: int
    shape: NetShape
    flags: int
    grid_m: float

    @property
    def antennas(self) -> Tuple[int, ...]:
        mask = (self.flags >> ANTENNA_SHIFT) & 0b111
        return tuple(a for a in range(csi.N_ANTENNAS) if mask & (1 << a))

    def batch_config(self, **overrides) -> BatchConfig:
        """Localization options recorded at training time."""
        opts = dict(
            distance="l2" if self.flags & FLAG_L2 else "l1",
            sigma_mode="var" if self.flags & FLAG_SIGMA_VAR else "std",
            bias_forward=not self.flags & FLAG_NO_BIAS_FORWARD,
        )
        opts.update(overrides)
        return BatchConfig(**opts)

    def payload_size(self) -> int:
        return self.n_locations * location_record_size(self.shape)


def location_record_size(shape: NetShape) -> int:
    n_floats = 4
    for fan_in, fan_out in shape.layer_dims:
        n_floats += 2 * fan_in * fan_out + fan_in + fan_out
    return 8 * n_floats


def _flags(antennas: Sequence[int], cfg: BatchConfig) -> int:
    flags = 0
    if cfg.distance == "l2":
        flags |= FLAG_L2
    if cfg.sigma_mode == "var":
        flags |= FLAG_SIGMA_VAR
    if not cfg.bias_forward:
        flags |= FLAG_NO_BIAS_FORWARD
    for a in antennas:
        flags |= 1 << (ANTENNA_SHIFT + a)
    return flags


def _default_mode() -> int:
    # mkstemp creates files 0600; give renamed files the usual umask-derived mode
    mask = os.umask(0)
    os.umask(mask)
    return 0o666 & ~mask


def _atomic_write(path, data: bytes):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, _default_mode())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_db(db: FingerprintDatabase, cfg: BatchConfig = BatchConfig()) -> bytes:
    if not len(db.entries):
        raise EmptyDb("refusing to save an empty database")
    first = db.entries[0]
    if tuple(sorted(first.antennas)) != first.antennas:
        raise ValueError("antenna subsets must be stored in ascending order")
    s = first.shape
    parts = [HEADER.pack(MAGIC, VERSION, len(db), s.k1, s.k2, s.k3, s.k4, s.n_in,
                         _flags(first.antennas, cfg), float(db.grid_m))]
    for m in db.entries:
        parts.append(np.array([m.location[0], m.location[1], m.norm.min_amp, m.norm.max_amp],
                              dtype="<f8").tobytes())
        for a in list(m.enc_w) + list(m.dec_w) + list(m.enc_b) + list(m.dec_b):
            parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return b"".join(parts)


def save_db(db: FingerprintDatabase, path, cfg: BatchConfig = BatchConfig()) -> None:
    """Write the database atomically (temp file, then rename)."""
    _atomic_write(path, encode_db(db, cfg))


def decode_header(data: bytes) -> DbFileHeader:
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise BadMagic("not a fingerprint database (bad magic)")
    if len(data) < HEADER.size:
        raise Truncated("file ends inside the header")
    magic, version, n, k1, k2, k3, k4, n_in, flags, grid_m = HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionMismatch(f"database version {version}, expected {VERSION}")
    try:
        shape = NetShape(k1, k2, k3, k4, n_in=n_in)
    except ValueError as exc:
        raise BadMagic(f"corrupted header: {exc}") from exc
    return DbFileHeader(magic, version, n, shape, flags, grid_m)


def read_header(path) -> DbFileHeader:
    with open(path, "rb") as fh:
        return decode_header(fh.read(HEADER.size))


def decode_db(data: bytes) -> FingerprintDatabase:
    header = decode_header(data)
    expected = HEADER.size + header.payload_size()
    if len(data) < expected:
        raise Truncated(f"expected {expected} bytes, found {len(data)}")
    if len(data) > expected:
        raise Truncated(f"{len(data) - expected} unexpected trailing bytes")
    shape = header.shape
    dims = shape.layer_dims
    enc_shapes = dims
    dec_shapes = [(fo, fi) for fi, fo in reversed(dims)]
    offset = HEADER.size

    def take(count):
        nonlocal offset
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(np.float64)
        offset += 8 * count
        return arr

    models = []
    for _ in range(header.n_locations):
        x, y, lo, hi = take(4)
        enc_w = [take(a * b).reshape(a, b) for a, b in enc_shapes]
        dec_w = [take(a * b).reshape(a, b) for a, b in dec_shapes]
        enc_b = [take(b) for _, b in enc_shapes]
        dec_b = [take(b) for _, b in dec_shapes]
        arrays = enc_w + dec_w + enc_b + dec_b
        if not all(np.all(np.isfinite(a)) for a in arrays) or not np.isfinite([x, y, lo, hi]).all():
            raise NonFiniteWeight(f"location ({x}, {y}) holds non-finite values")
        models.append(FingerprintModel(shape, tuple(enc_w), tuple(enc_b), tuple(dec_w), tuple(dec_b),
                                       NormalizationParams(float(lo), float(hi)), (x, y),
                                       header.antennas))
    return FingerprintDatabase(models, grid_m=header.grid_m)


def load_db(path) -> FingerprintDatabase:
    return decode_db(Path(path).read_bytes())


# ---------------------------------------------------------------- datasets

CSV_HEADER = (["location_id", "x_m", "y_m", "rss_dbm"]
              + [f"a{a}s{s}" for a in range(csi.N_ANTENNAS) for s in range(csi.N_SUBCARRIERS)])


@dataclass
class DatasetLocation:
    location_id: str
    x: float
    y: float
    packets: List[CsiPacket] = field(default_factory=list)

    @property
    def xy(self) -> Tuple[float, float]:
        return (self.x, self.y)


def write_dataset(path, locations: Sequence[DatasetLocation]) -> None:
    """One CSV row per packet; floats use ``repr`` so they read back exactly."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for loc in locations:
                for p in loc.packets:
                    rss = "" if p.rss is None else repr(float(p.rss))
                    w.writerow([loc.location_id, repr(float(loc.x)), repr(float(loc.y)), rss]
                               + [repr(float(a)) for a in p.amplitudes])
        os.chmod(tmp, _default_mode())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_dataset(path) -> List[DatasetLocation]:
    """Packets grouped by location id, in order of first appearance.

    Empty coordinates (unknown truth) read as NaN. Packets get sequential
    timestamps within their location.
    """
    locations: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetFormatError(f"{path}: empty file, header row missing")
        if header != CSV_HEADER:
            raise DatasetFormatError(f"{path}: unexpected header")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise DatasetFormatError(f"{path}:{lineno}: {len(row)} columns, expected {len(CSV_HEADER)}")
            try:
                loc_id, rss = row[0], row[3]
                x, y = (float(c) if c.strip() else float("nan") for c in row[1:3])
                amps = np.array([float(v) for v in row[4:]])
                loc = locations.get(loc_id)
                if loc is None:
                    loc = locations[loc_id] = DatasetLocation(loc_id, x, y)
                elif not np.array_equal([loc.x, loc.y], [x, y], equal_nan=True):
                    raise DatasetFormatError(f"{path}:{lineno}: location {loc_id} changes coordinates")
                loc.packets.append(CsiPacket(amps, rss=float(rss) if rss.strip() else None,
                                             timestamp=len(loc.packets)))
            except DatasetFormatError:
                raise
            except (ValueError, ShapeMismatch) as exc:
                raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
    if not locations:
        warnings.warn(f"{path}: dataset has a header but no packets", stacklevel=2)
    return list(locations.values())

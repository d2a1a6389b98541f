"""Comparison localizers: FIFS-style CSI, Horus-style RSS, single-candidate ML, KNN.

These follow the one-line descriptions of the original systems with diagonal
Gaussian likelihoods. They are approximations, not reproductions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from . import csi
from .errors import EmptyDb, EmptyInput
from .locator import LocationEstimate, fuse, posterior_from_log

STD_FLOOR = 1e-3
_LOG_2PI = np.log(2 * np.pi)


@dataclass
class BaselineDb:
    locations: np.ndarray   # (N, 2)
    csi_mean: np.ndarray    # (N, 30) antenna-averaged amplitudes
    csi_std: np.ndarray
    rss_mean: np.ndarray    # (N,)
    rss_std: np.ndarray
    features: np.ndarray    # (N, 90) mean raw amplitudes, for KNN


def antenna_average(x: np.ndarray) -> np.ndarray:
    return x.reshape(x.shape[0], csi.N_ANTENNAS, csi.N_SUBCARRIERS).mean(axis=1)


def _rss(packets) -> np.ndarray:
    rss = np.array([np.nan if p.rss is None else p.rss for p in packets], dtype=np.float64)
    if np.any(np.isnan(rss)):
        raise ValueError("RSS-based methods need an RSS value on every packet")
    return rss


def build_baseline_db(points: Sequence[Tuple[Tuple[float, float], Sequence[csi.CsiPacket]]],
                      with_rss: bool = True) -> BaselineDb:
    """Per-location summary statistics from training packets."""
    if not points:
        raise EmptyDb("no training locations")
    locs, cm, cs, rm, rs, feats = [], [], [], [], [], []
    for xy, packets in points:
        x = csi.as_matrix(packets)
        if x.shape[0] == 0:
            raise EmptyInput(f"location {xy} has no packets")
        avg = antenna_average(x)
        locs.append(xy)
        cm.append(avg.mean(axis=0))
        cs.append(np.maximum(avg.std(axis=0), STD_FLOOR))
        feats.append(x.mean(axis=0))
        if with_rss:
            r = _rss(packets)
            rm.append(r.mean())
            rs.append(max(r.std(), STD_FLOOR))
        else:
            rm.append(np.nan)
            rs.append(np.nan)
    return BaselineDb(np.array(locs, dtype=np.float64), np.array(cm), np.array(cs),
                      np.array(rm), np.array(rs), np.array(feats))


def _gauss_loglik(x, mean, std):
    return -0.5 * ((x - mean) / std) ** 2 - np.log(std) - 0.5 * _LOG_2PI


def _finish(db: BaselineDb, ll: np.ndarray) -> LocationEstimate:
    post, degenerate = posterior_from_log(ll)
    return LocationEstimate(xy=fuse(db.locations, post), posterior=post,
                            likelihoods=np.exp(ll), log_likelihoods=ll, degenerate=degenerate)


def _check(db: BaselineDb, packets):
    if db is None or len(db.locations) == 0:
        raise EmptyDb("baseline database is empty")
    if not len(packets):
        raise EmptyInput("no packets to localize")


def fifs_loglik(db: BaselineDb, packets) -> np.ndarray:
    """Product of per-subcarrier Gaussians on the antenna- and packet-averaged CSI."""
    t = antenna_average(csi.as_matrix(packets)).mean(axis=0)
    return _gauss_loglik(t[None, :], db.csi_mean, db.csi_std).sum(axis=1)


def fifs_estimate(db: BaselineDb, packets) -> LocationEstimate:
    _check(db, packets)
    return _finish(db, fifs_loglik(db, packets))


def horus_loglik(db: BaselineDb, packets) -> np.ndarray:
    """Independent Gaussian RSS likelihood of every packet, summed in log space."""
    r = _rss(packets)
    return _gauss_loglik(r[None, :], db.rss_mean[:, None], db.rss_std[:, None]).sum(axis=1)


def horus_estimate(db: BaselineDb, packets) -> LocationEstimate:
    _check(db, packets)
    return _finish(db, horus_loglik(db, packets))


def ml_estimate(db: BaselineDb, packets) -> LocationEstimate:
    """The single most likely reference location under the Horus likelihood.

    Ties go to the lowest location index.
    """
    _check(db, packets)
    ll = horus_loglik(db, packets)
    best = int(np.argmax(ll))
    post = np.zeros(len(ll))
    post[best] = 1.0
    loc = db.locations[best]
    return LocationEstimate(xy=(float(loc[0]), float(loc[1])), posterior=post,
                            likelihoods=np.exp(ll), log_likelihoods=ll)


def knn_estimate(db: BaselineDb, packets, k: int = 3) -> LocationEstimate:
    """Inverse-Euclidean-distance weighted average of the k nearest feature vectors."""
    _check(db, packets)
    if k < 1:
        raise ValueError("k must be >= 1")
    t = csi.as_matrix(packets).mean(axis=0)
    dist = np.linalg.norm(db.features - t[None, :], axis=1)
    nearest = np.argsort(dist, kind="stable")[:k]
    weights = np.zeros(len(dist))
    exact = nearest[dist[nearest] == 0.0]
    if exact.size:
        weights[exact[0]] = 1.0
    else:
        weights[nearest] = 1.0 / dist[nearest]
    post = weights / weights.sum()
    return LocationEstimate(xy=fuse(db.locations, post), posterior=post, likelihoods=weights)

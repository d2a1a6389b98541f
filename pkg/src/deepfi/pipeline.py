"""Whole-pipeline helpers: train a database, localize test points, run experiments."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import analysis, baselines, csi, simulator
from .deepnet import NetShape, TrainConfig, train_location
from .locator import BatchConfig, FingerprintDatabase, LocationEstimate, estimate
from .seeding import location_seed

log = logging.getLogger(__name__)

METHODS = ("deepfi", "fifs", "horus", "ml", "knn")
KNN_K = 3

Point = Tuple[Tuple[float, float], Sequence[csi.CsiPacket]]


def _train_one(args):
    packets, shape, cfg, xy, antennas = args
    cfg = replace(cfg, seed=location_seed(cfg.seed, xy))
    return train_location(packets, shape, cfg, xy, antennas)


def train_database(points: Sequence[Point], shape: NetShape, cfg: TrainConfig,
                   antennas: Sequence[int] = csi.ALL_ANTENNAS, grid_m: float = 0.5,
                   jobs: int = 1) -> FingerprintDatabase:
    """Train one model per location.

    Every model's seed derives from the base seed and its coordinates, so
    the result does not depend on location order or on ``jobs``.
    """
    tasks = [(list(packets), shape, cfg, tuple(xy), tuple(antennas)) for xy, packets in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            models = list(pool.map(_train_one, tasks))
    else:
        models = [_train_one(t) for t in tasks]
    return FingerprintDatabase(models, grid_m=grid_m)


def localize(method: str, packets: Sequence[csi.CsiPacket], db: Optional[FingerprintDatabase] = None,
             baseline_db: Optional[baselines.BaselineDb] = None,
             cfg: BatchConfig = BatchConfig(), jobs: int = 1) -> LocationEstimate:
    if method == "deepfi":
        return estimate(db, packets, cfg, jobs=jobs)
    if method == "fifs":
        return baselines.fifs_estimate(baseline_db, packets)
    if method == "horus":
        return baselines.horus_estimate(baseline_db, packets)
    if method == "ml":
        return baselines.ml_estimate(baseline_db, packets)
    if method == "knn":
        return baselines.knn_estimate(baseline_db, packets, KNN_K)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


@dataclass
class ExperimentConfig:
    """Scale knobs of one simulated experiment."""

    layout: str = "living_room"
    seed: int = 0
    shape: NetShape = NetShape(60, 40, 20, 10)
    train: TrainConfig = TrainConfig(pretrain_epochs=20)
    batch: BatchConfig = BatchConfig()
    n_train_packets: int = 100
    n_test_packets: int = 100
    noise_std: float = 0.05
    grid_m: float = 0.5
    jobs: int = 1

    def scenario(self) -> simulator.SimScenario:
        overrides = dict(seed=self.seed, noise_std=self.noise_std, grid_m=self.grid_m)
        if self.layout == "laboratory":
            return simulator.SimScenario.laboratory(**overrides)
        return simulator.SimScenario.living_room(**overrides)


@dataclass
class ExperimentResult:
    truths: List[Tuple[float, float]]
    estimates: Dict[str, List[Tuple[float, float]]] = field(default_factory=dict)

    def errors(self, method: str) -> np.ndarray:
        e = np.asarray(self.estimates[method])
        t = np.asarray(self.truths)
        return np.hypot(e[:, 0] - t[:, 0], e[:, 1] - t[:, 1])

    def mean_error(self, method: str) -> float:
        return analysis.mean_sum_error(self.estimates[method], self.truths)


def simulate(exp: ExperimentConfig, n_test_packets: Optional[int] = None) -> simulator.GroundTruthSet:
    return simulator.generate(exp.scenario(), exp.layout, n_train_packets=exp.n_train_packets,
                              n_test_packets=exp.n_test_packets if n_test_packets is None else n_test_packets)


def run_experiment(exp: ExperimentConfig, methods: Sequence[str] = METHODS,
                   antenna_sets: Sequence[Tuple[int, ...]] = (csi.ALL_ANTENNAS,),
                   data: Optional[simulator.GroundTruthSet] = None) -> ExperimentResult:
    """Simulate (unless ``data`` is given), train, and localize every test point.

    DeepFi estimates for an antenna subset other than all three are stored
    under ``deepfi[a,b]``.
    """
    data = simulate(exp) if data is None else data
    train_pts = [(p.xy, p.packets) for p in data.train_points]
    result = ExperimentResult(truths=[p.xy for p in data.test_points])
    bdb = None
    if any(m != "deepfi" for m in methods):
        bdb = baselines.build_baseline_db(train_pts)
    for method in methods:
        if method == "deepfi":
            for ants in antenna_sets:
                db = train_database(train_pts, exp.shape, exp.train, ants, exp.grid_m, exp.jobs)
                key = "deepfi" if tuple(ants) == csi.ALL_ANTENNAS else "deepfi[" + ",".join(map(str, ants)) + "]"
                result.estimates[key] = [
                    estimate(db, p.packets[:exp.n_test_packets], exp.batch).xy for p in data.test_points]
        else:
            result.estimates[method] = [
                localize(method, p.packets[:exp.n_test_packets], baseline_db=bdb).xy
                for p in data.test_points]
    return result

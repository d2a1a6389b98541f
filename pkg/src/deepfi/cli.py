"""Command-line entry point: simulate, train, localize, benchmark, analyze.

Exit status is 0 on success, 2 on usage errors and 1 on runtime errors.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import analysis, baselines, csi, datastore, pipeline, simulator
from .datastore import DatasetLocation
from .deepnet import LABORATORY_SHAPE, LIVING_ROOM_SHAPE, NetShape, TrainConfig
from .errors import DeepFiError
from .locator import BatchConfig, estimate

log = logging.getLogger("deepfi")

DEFAULT_SHAPES = {"living_room": LIVING_ROOM_SHAPE, "laboratory": LABORATORY_SHAPE,
                  "custom": LIVING_ROOM_SHAPE}
SWEEPS = {
    "none": [None],
    "antennas": [(0, 1, 2), (0,), (1,), (2,)],
    "test-packets": [5, 10, 30, 100, 300],
    "batch-size": [1, 3, 5, 10, 50, 100],
    "grid-size": [0.3, 0.5, 0.7],
}


def _int_list(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _antennas(text: str):
    ants = tuple(sorted(set(_int_list(text))))
    if not ants or any(a not in range(csi.N_ANTENNAS) for a in ants):
        raise argparse.ArgumentTypeError("antennas must be a non-empty subset of 0,1,2")
    return ants


def _methods(text: str):
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in pipeline.METHODS]
    if bad or not methods:
        raise argparse.ArgumentTypeError(f"unknown methods {bad}; choose from {','.join(pipeline.METHODS)}")
    return methods


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--shape", help="hidden widths K1,K2,K3,K4 (default depends on --layout)")
    p.add_argument("--alpha", type=float, default=0.01, help="CD-1 step size")
    p.add_argument("--pretrain-epochs", type=int, default=50)
    p.add_argument("--finetune-epochs", type=int, default=30)
    p.add_argument("--finetune-lr", type=float, default=0.005)
    p.add_argument("--cd-sampling", choices=("probabilities", "full"), default="probabilities")


def _add_locate_flags(p: argparse.ArgumentParser):
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--n-test-packets", type=int, default=100)
    p.add_argument("--distance", choices=("l1", "l2"), default=None)
    p.add_argument("--sigma-mode", choices=("std", "var"), default=None)
    p.add_argument("--no-bias-forward", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepfi", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--layout", choices=simulator.LAYOUTS, default="living_room")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--noise-std", type=float, default=0.05)
    p.add_argument("--grid-m", type=float, default=0.5)
    p.add_argument("--train-packets", type=int, default=None)
    p.add_argument("--test-packets", type=int, default=None)

    p = sub.add_parser("train", help="train a fingerprint database from a dataset CSV")
    p.add_argument("--dataset", required=True, type=Path)
    p.add_argument("--layout", choices=simulator.LAYOUTS, default="living_room",
                   help="selects the default --shape")
    _add_train_flags(p)
    p.add_argument("--antennas", type=_antennas, default=csi.ALL_ANTENNAS)
    p.add_argument("--distance", choices=("l1", "l2"), default="l1")
    p.add_argument("--sigma-mode", choices=("std", "var"), default="std")
    p.add_argument("--no-bias-forward", action="store_true")
    p.add_argument("--grid-m", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("localize", help="estimate positions; CSV report on stdout")
    p.add_argument("--db", type=Path, help="fingerprint database (deepfi method)")
    p.add_argument("--packets", required=True, type=Path)
    p.add_argument("--method", choices=pipeline.METHODS, default="deepfi")
    p.add_argument("--train-dataset", type=Path, help="training CSV (baseline methods)")
    p.add_argument("--knn-k", type=int, default=pipeline.KNN_K)
    _add_locate_flags(p)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("benchmark", help="simulate, train and compare methods")
    p.add_argument("--methods", type=_methods, default=list(pipeline.METHODS))
    p.add_argument("--sweep", choices=tuple(SWEEPS), default="none")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--layout", choices=("living_room", "laboratory"), default="living_room")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    _add_train_flags(p)
    p.add_argument("--train-packets", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--n-test-packets", type=int, default=100)
    p.add_argument("--noise-std", type=float, default=0.05)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("analyze", help="CSI statistics as CSV on stdout")
    p.add_argument("what", choices=("stability", "clusters", "correlation", "error-cdf"))
    p.add_argument("--dataset", type=Path, help="dataset CSV")
    p.add_argument("--report", type=Path, help="localize report CSV (error-cdf)")
    p.add_argument("--feature", choices=("csi", "rss"), default="csi")
    p.add_argument("--tolerance", type=float, default=analysis.DEFAULT_CLUSTER_TOLERANCE)
    return parser


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_simulate(args) -> int:
    overrides = dict(seed=args.seed, noise_std=args.noise_std, grid_m=args.grid_m)
    if args.layout == "laboratory":
        sc = simulator.SimScenario.laboratory(**overrides)
    else:
        sc = simulator.SimScenario.living_room(**overrides)
    data = simulator.generate(sc, args.layout, args.train_packets, args.test_packets)
    args.out.mkdir(parents=True, exist_ok=True)
    for name, points in (("train", data.train_points), ("test", data.test_points)):
        locs = [DatasetLocation(f"{name}_{i:03d}", p.x, p.y, p.packets) for i, p in enumerate(points)]
        datastore.write_dataset(args.out / f"{name}.csv", locs)
    meta = sc.to_meta() + f"layout={args.layout}\n"
    (args.out / "scenario.meta").write_text(meta, encoding="utf-8")
    log.info("wrote %d train and %d test locations to %s",
             len(data.train_points), len(data.test_points), args.out)
    return 0


def _shape(args, n_in: int = csi.N_CSI) -> NetShape:
    if args.shape:
        try:
            return NetShape.parse(args.shape, n_in=n_in)
        except ValueError as exc:
            raise _UsageError(f"--shape: {exc}") from exc
    return replace(DEFAULT_SHAPES[getattr(args, "layout", "living_room")], n_in=n_in)


def _train_config(args) -> TrainConfig:
    return TrainConfig(alpha=args.alpha, pretrain_epochs=args.pretrain_epochs,
                       finetune_epochs=args.finetune_epochs, finetune_lr=args.finetune_lr,
                       seed=args.seed, cd_sampling=args.cd_sampling)


def cmd_train(args) -> int:
    locations = datastore.read_dataset(args.dataset)
    if not locations:
        raise DeepFiError(f"{args.dataset} holds no packets")
    shape = _shape(args, n_in=csi.N_SUBCARRIERS * len(args.antennas))
    cfg = _train_config(args)
    t0 = time.perf_counter()
    db = pipeline.train_database([(loc.xy, loc.packets) for loc in locations], shape, cfg,
                                 args.antennas, args.grid_m, args.jobs)
    batch = BatchConfig(distance=args.distance, sigma_mode=args.sigma_mode,
                        bias_forward=not args.no_bias_forward)
    datastore.save_db(db, args.out, batch)
    log.info("trained %d locations in %.1f s -> %s", len(db), time.perf_counter() - t0, args.out)
    return 0


def _batch_config(args, header: Optional[datastore.DbFileHeader]) -> BatchConfig:
    overrides = {"batch_size": args.batch_size}
    if args.distance is not None:
        overrides["distance"] = args.distance
    if args.sigma_mode is not None:
        overrides["sigma_mode"] = args.sigma_mode
    if args.no_bias_forward:
        overrides["bias_forward"] = False
    if header is not None:
        return header.batch_config(**overrides)
    return BatchConfig(**overrides)


def cmd_localize(args, out=None) -> int:
    out = out or sys.stdout
    tests = datastore.read_dataset(args.packets)
    db = bdb = header = None
    if args.method == "deepfi":
        if args.db is None:
            raise _UsageError("--db is required for --method deepfi")
        header = datastore.read_header(args.db)
        db = datastore.load_db(args.db)
    else:
        if args.train_dataset is None:
            raise _UsageError(f"--train-dataset is required for --method {args.method}")
        train = datastore.read_dataset(args.train_dataset)
        bdb = baselines.build_baseline_db([(loc.xy, loc.packets) for loc in train])
    cfg = _batch_config(args, header)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["test_id", "x_hat", "y_hat", "x_true", "y_true", "error_m"])
    for loc in tests:
        packets = loc.packets[:args.n_test_packets]
        if args.method == "knn":
            est = baselines.knn_estimate(bdb, packets, args.knn_k)
        else:
            est = pipeline.localize(args.method, packets, db=db, baseline_db=bdb, cfg=cfg, jobs=args.jobs)
        x, y = est.xy
        known = np.isfinite(loc.x) and np.isfinite(loc.y)
        err = float(np.hypot(x - loc.x, y - loc.y)) if known else None
        w.writerow([loc.location_id, _fmt(x), _fmt(y),
                    _fmt(loc.x) if known else "", _fmt(loc.y) if known else "",
                    _fmt(err) if known else ""])
    return 0


def cmd_benchmark(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    shape = _shape(args)
    base = pipeline.ExperimentConfig(
        layout=args.layout, shape=shape, train=_train_config(args),
        batch=BatchConfig(batch_size=args.batch_size), n_train_packets=args.train_packets,
        n_test_packets=args.n_test_packets, noise_std=args.noise_std, jobs=args.jobs)
    rows = []
    all_errors = {}
    for value in SWEEPS[args.sweep]:
        for trial in range(args.trials):
            exp = replace(base, seed=args.seed + trial)
            methods, antenna_sets = args.methods, (csi.ALL_ANTENNAS,)
            data = None
            if args.sweep == "antennas":
                methods, antenna_sets = ["deepfi"], (value,)
            elif args.sweep == "test-packets":
                exp = replace(exp, n_test_packets=value)
                data = pipeline.simulate(exp, n_test_packets=max(value, base.n_test_packets))
            elif args.sweep == "batch-size":
                exp = replace(exp, batch=replace(exp.batch, batch_size=value))
            elif args.sweep == "grid-size":
                exp = replace(exp, grid_m=value)
            t0 = time.perf_counter()
            result = pipeline.run_experiment(exp, methods, antenna_sets, data=data)
            elapsed = time.perf_counter() - t0
            for method in result.estimates:
                errs = result.errors(method)
                all_errors.setdefault((value, method), []).extend(errs.tolist())
                label = ",".join(map(str, value)) if isinstance(value, tuple) else value
                rows.append([args.sweep, "" if label is None else label, method, trial,
                             _fmt(errs.mean()), _fmt(errs.std()), f"{elapsed:.3f}"])
    with open(args.out / "table.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "value", "method", "trial", "mean_error_m", "std_error_m", "time_s"])
        w.writerows(rows)
    for (value, method), errs in all_errors.items():
        tag = method.replace("[", "_").replace("]", "").replace(",", "")
        if value is not None and not isinstance(value, tuple):
            tag += f"_{value}"
        with open(args.out / f"cdf_{tag}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["error_m", "cumulative_fraction"])
            w.writerows([[_fmt(e), _fmt(f)] for e, f in analysis.error_cdf(errs)])
    for row in rows:
        log.info("%s", " ".join(str(c) for c in row))
    return 0


def cmd_analyze(args, out=None) -> int:
    out = out or sys.stdout
    w = csv.writer(out, lineterminator="\n")
    if args.what == "error-cdf":
        if args.report is None:
            raise _UsageError("--report is required for error-cdf")
        with open(args.report, newline="", encoding="utf-8") as fh:
            errs = [float(r["error_m"]) for r in csv.DictReader(fh) if r["error_m"]]
        w.writerow(["error_m", "cumulative_fraction"])
        w.writerows([[_fmt(e), _fmt(f)] for e, f in analysis.error_cdf(errs)])
        return 0
    if args.dataset is None:
        raise _UsageError(f"--dataset is required for {args.what}")
    locs = datastore.read_dataset(args.dataset)
    if args.what == "stability":
        w.writerow(["ratio", "cumulative_fraction"])
        cdf = analysis.stability_cdf([loc.packets for loc in locs], args.feature)
        w.writerows([[_fmt(r), _fmt(f)] for r, f in cdf])
    elif args.what == "clusters":
        w.writerow(["location_id", "antenna", "clusters"])
        for loc in locs:
            mean = csi.as_matrix(loc.packets).mean(axis=0)
            for a in range(csi.N_ANTENNAS):
                seg = mean[a * csi.N_SUBCARRIERS:(a + 1) * csi.N_SUBCARRIERS]
                w.writerow([loc.location_id, a, analysis.count_clusters(seg, args.tolerance)])
    elif args.what == "correlation":
        w.writerow(["location_a", "location_b", "distance_m", "correlation"])
        means = [csi.as_matrix(loc.packets).mean(axis=0) for loc in locs]
        for i in range(len(locs)):
            for j in range(i + 1, len(locs)):
                d = np.hypot(locs[i].x - locs[j].x, locs[i].y - locs[j].y)
                w.writerow([locs[i].location_id, locs[j].location_id, _fmt(d),
                            _fmt(analysis.correlation(means[i], means[j]))])
    return 0


class _UsageError(Exception):
    pass


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "localize": cmd_localize,
    "benchmark": cmd_benchmark,
    "analyze": cmd_analyze,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"deepfi {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except (DeepFiError, OSError, ValueError) as exc:
        print(f"deepfi {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

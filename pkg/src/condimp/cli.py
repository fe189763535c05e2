"""Command line entry points: ``simulate``, ``importance``, ``bench``, ``report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from ._rng import stream
from .inference import cpi_importance, loco_importance, marginal_importance, pi_importance
from .learners.data import Dataset
from .learners.selection import LearnerSpec, make_crossfit
from .simgen import SCENARIOS, ScenarioSpec, simulate, write_dataset

TASKS = {"reg": "regression", "bin": "binary"}
CONSTRUCTION_FLAGS = {"additive": "additive", "leaf": "leaf_sampling"}


def _cmd_simulate(args) -> int:
    spec = ScenarioSpec(scenario=args.scenario, n=args.n, p=args.p, rho=args.rho, snr=args.snr,
                        n_signal=args.n_signal, seed=args.seed)
    X, y, truth = simulate(spec)
    csv_path, sidecar = write_dataset(args.out, X, y, truth, spec)
    print(f"wrote {csv_path} and {sidecar}")
    return 0


def read_table(path, target: str):
    """Numeric CSV with a header row; returns ``(X, y, feature_names)``."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if target not in header:
        raise SystemExit(f"target column {target!r} not found in {path}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = header.index(target)
    names = [h for k, h in enumerate(header) if k != t]
    return np.delete(data, t, axis=1), data[:, t], names


def _cmd_importance(args) -> int:
    X, y, names = read_table(args.data, args.target)
    data = Dataset(X, y, TASKS[args.task])
    t0 = time.perf_counter()
    rng = stream(args.seed, "importance")
    if args.method == "marginal":
        report = marginal_importance(data)
    else:
        crossfit = make_crossfit(data, stream(args.seed, "learner", args.learner), learner=LearnerSpec(args.learner))
        z_mode = "literal" if args.z_literal else "se"
        if args.method == "cpi":
            report = cpi_importance(crossfit, X, y, data.task, B=args.B, rng=rng,
                                    construction=CONSTRUCTION_FLAGS[args.construction], z_mode=z_mode)
        elif args.method == "pi":
            report = pi_importance(crossfit, X, y, data.task, B=args.B, rng=rng, z_mode=z_mode)
        else:
            report = loco_importance(data, crossfit, rng=rng, z_mode=z_mode)
    seconds = time.perf_counter() - t0
    rows = report.to_dict()["variables"]
    for row in rows:
        row["name"] = names[row["variable"]]
    out = {
        "variables": rows,
        "meta": {
            "config": {k: v for k, v in vars(args).items() if k != "func"},
            "wall_seconds": seconds,
            **report.meta,
        },
    }
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        print(text)
    return 0


def _cmd_bench(args) -> int:
    config = bench_mod.BenchConfig.load(args.config)
    if args.workers is not None:
        config.workers = args.workers
    if args.out is not None:
        config.out = args.out
    if args.full:
        config.runs = 100
    records = bench_mod.run_bench(config, resume=args.resume)
    summary = bench_mod.aggregate(records)
    written = bench_mod.emit_report(summary, Path(config.out) / "report")
    failed = sum(r.get("status") != "ok" for r in records)
    print(f"{len(records)} records ({failed} failed); report in {written['csv'].parent}")
    return 0


def _cmd_report(args) -> int:
    records = bench_mod.load_records(args.runs)
    if not records:
        raise SystemExit(f"no run records under {args.runs}")
    summary = bench_mod.aggregate(records)
    written = bench_mod.emit_report(summary, args.out, formats=tuple(args.format))
    for path in written.values():
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="condimp", description="Conditional permutation importance toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic data set")
    p.add_argument("--scenario", choices=SCENARIOS, default="exp1")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--p", type=int, default=50)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--snr", type=float, default=4.0)
    p.add_argument("--n-signal", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("importance", help="variable importance on a CSV file")
    p.add_argument("--data", required=True)
    p.add_argument("--target", default="y")
    p.add_argument("--task", choices=sorted(TASKS), default="reg")
    p.add_argument("--method", choices=("cpi", "pi", "loco", "marginal"), default="cpi")
    p.add_argument("--learner", choices=("mlp", "rf"), default="mlp")
    p.add_argument("--B", type=int, default=50)
    p.add_argument("--construction", choices=sorted(CONSTRUCTION_FLAGS), default="additive")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--z-literal", action="store_true", help="z = mean/sd instead of mean/(sd/sqrt(n))")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_importance)

    p = sub.add_parser("bench", help="run a multi-run benchmark from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--resume", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--full", action="store_true", help="100 runs per cell instead of the configured count")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("report", help="aggregate stored run records")
    p.add_argument("--runs", required=True, help="bench output directory")
    p.add_argument("--out", required=True)
    p.add_argument("--format", nargs="+", choices=("csv", "json", "svg"), default=["csv", "json", "svg"])
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

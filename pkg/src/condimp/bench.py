"""Multi-run simulation benchmarks.

A bench is a grid of (scenario, method, run) tasks.  Each task simulates a
fresh data set from streams derived from ``(seed, scenario, run)``, fits the
cross-fitted learner from ``(seed, scenario, run, learner)`` -- so methods
sharing a learner see the same fitted models -- computes importances and
scores them against the ground truth.

Every finished task is written to its own JSON file and appended to
``index.jsonl``; re-running a bench skips tasks whose file exists.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._rng import stream
from .condsampler import CONSTRUCTIONS, DEPTH_GRID
from .inference import METHODS, Z_MODES, cpi_importance, loco_importance, marginal_importance, pi_importance
from .learners.data import Dataset
from .learners.forest import ForestConfig
from .learners.mlp import DEFAULT_GRID, MlpConfig
from .learners.selection import LEARNERS, LearnerSpec, make_crossfit
from .metrics import evaluate
from .simgen import ScenarioSpec, simulate

log = logging.getLogger(__name__)

REPORT_METRICS = ("auc", "type1_error", "power")
CSV_COLUMNS = ("scenario", "method", "metric", "mean", "se", "n_runs")


def _depth_in(d):
    return None if d is None or int(d) < 0 else int(d)


@dataclass(frozen=True)
class MethodSpec:
    """An importance method bound to a learner and its options."""

    name: str
    method: str
    learner: str | None = "mlp"
    construction: str = "additive"
    depth_grid: tuple = DEPTH_GRID
    z_mode: str = "se"
    sampler_fit: str = "test"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method == "marginal":
            object.__setattr__(self, "learner", None)
        elif self.learner not in LEARNERS:
            raise ValueError(f"unknown learner {self.learner!r} for {self.name}")
        if self.construction not in CONSTRUCTIONS:
            raise ValueError(f"unknown construction {self.construction!r}")
        if self.z_mode not in Z_MODES:
            raise ValueError(f"unknown z_mode {self.z_mode!r}")
        object.__setattr__(self, "depth_grid", tuple(_depth_in(d) for d in self.depth_grid))

    @classmethod
    def parse(cls, item) -> "MethodSpec":
        """``"cpi-mlp"``-style tags or dicts with explicit fields."""
        if isinstance(item, MethodSpec):
            return item
        if isinstance(item, str):
            parts = item.split("-")
            if parts[0] == "marginal":
                return cls(name=item, method="marginal", learner=None)
            if len(parts) != 2:
                raise ValueError(f"method tag {item!r} should look like 'cpi-mlp'")
            return cls(name=item, method=parts[0], learner=parts[1])
        d = dict(item)
        if "depth_grid" in d:
            d["depth_grid"] = tuple(d["depth_grid"])
        if "name" not in d:
            d["name"] = d["method"] if d["method"] == "marginal" else f"{d['method']}-{d.get('learner', 'mlp')}"
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["depth_grid"] = [-1 if g is None else g for g in self.depth_grid]
        return d


@dataclass
class BenchConfig:
    scenarios: list
    methods: list
    runs: int = 30
    B: int = 50
    alpha: float = 0.05
    seed: int = 0
    workers: int = 1
    out: str = "bench_out"
    sampler_trees: int = 100
    sampler_min_leaf: int = 5
    mlp: dict = field(default_factory=dict)
    rf: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scenarios = [s if isinstance(s, ScenarioSpec) else ScenarioSpec(**s) for s in self.scenarios]
        self.methods = [MethodSpec.parse(m) for m in self.methods]
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.B < 1:
            raise ValueError("B must be >= 1")
        labels = [s.label for s in self.scenarios]
        if len(set(labels)) != len(labels):
            raise ValueError("scenario labels must be unique")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ValueError("method names must be unique")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        return cls(**d)

    @classmethod
    def load(cls, path) -> "BenchConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "scenarios": [s.to_dict() for s in self.scenarios],
            "methods": [m.to_dict() for m in self.methods],
            "runs": self.runs,
            "B": self.B,
            "alpha": self.alpha,
            "seed": self.seed,
            "workers": self.workers,
            "out": str(self.out),
            "sampler_trees": self.sampler_trees,
            "sampler_min_leaf": self.sampler_min_leaf,
            "mlp": self.mlp,
            "rf": self.rf,
        }

    def learner_spec(self, kind: str) -> LearnerSpec:
        if kind == "mlp":
            if not self.mlp:
                return LearnerSpec("mlp", DEFAULT_GRID)
            base = {k: v for k, v in self.mlp.items() if k != "grid"}
            if "widths" in base:
                base["widths"] = tuple(base["widths"])
            grid = self.mlp.get("grid")
            if grid:
                return LearnerSpec("mlp", tuple(MlpConfig(**{**base, **g}) for g in grid))
            if base:
                return LearnerSpec("mlp", tuple(
                    MlpConfig(**{**base, "learning_rate": c.learning_rate, "l1": c.l1, "l2": c.l2})
                    for c in DEFAULT_GRID))
            return LearnerSpec("mlp", DEFAULT_GRID)
        rf = dict(self.rf)
        return LearnerSpec("rf", (ForestConfig(**rf),))

    def sampler_config(self) -> ForestConfig:
        return ForestConfig(n_trees=self.sampler_trees, min_leaf=self.sampler_min_leaf)


def record_path(out, label: str, method: str, run_id: int) -> Path:
    return Path(out) / "records" / label / method / f"run_{run_id:04d}.json"


def _finite(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def run_task(config: BenchConfig, scenario: ScenarioSpec, method: MethodSpec, run_id: int) -> dict:
    """One (scenario, method, run) cell; never raises, failures are recorded."""
    label = scenario.label
    trail = {
        "seed": config.seed,
        "data": ["data", label, run_id],
        "learner": ["learner", label, run_id, method.learner],
        "importance": ["importance", label, run_id, method.name],
    }
    record = {
        "run_id": run_id,
        "scenario": label,
        "spec": scenario.to_dict(),
        "method": method.name,
        "method_spec": method.to_dict(),
        "seed_trail": trail,
    }
    t0 = time.perf_counter()
    try:
        X, y, truth = simulate(scenario, stream(config.seed, *trail["data"]))
        data = Dataset(X, y, scenario.task)
        imp_rng = stream(config.seed, *trail["importance"])
        if method.method == "marginal":
            report = marginal_importance(data)
        else:
            spec = config.learner_spec(method.learner)
            crossfit = make_crossfit(data, stream(config.seed, *trail["learner"]), learner=spec)
            if method.method == "cpi":
                report = cpi_importance(crossfit, X, y, data.task, B=config.B, rng=imp_rng,
                                        construction=method.construction, depth_grid=method.depth_grid,
                                        forest_config=config.sampler_config(),
                                        sampler_fit=method.sampler_fit, z_mode=method.z_mode)
            elif method.method == "pi":
                report = pi_importance(crossfit, X, y, data.task, B=config.B, rng=imp_rng, z_mode=method.z_mode)
            else:
                report = loco_importance(data, crossfit, rng=imp_rng, z_mode=method.z_mode)
        seconds = time.perf_counter() - t0
        ev = evaluate(report.pvalues, truth.support, config.alpha, seconds)
        record.update({
            "status": "ok",
            "report": report.to_dict()["variables"],
            "eval": ev.to_dict(),
            "support": [bool(s) for s in truth.support],
            "seconds": seconds,
        })
    except Exception as exc:  # one failed run must not stop the bench
        record.update({
            "status": "failed",
            "error": f"{type(exc).__name__}: {exc}",
            "traceback": traceback.format_exc(),
            "seconds": time.perf_counter() - t0,
        })
    return record


def _run_task_args(args):
    return run_task(*args)


def _write_record(out, record: dict) -> Path:
    path = record_path(out, record["scenario"], record["method"], record["run_id"])
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(record, indent=1, sort_keys=True))
    os.replace(tmp, path)
    with open(Path(out) / "index.jsonl", "a") as fh:
        fh.write(json.dumps({"scenario": record["scenario"], "method": record["method"],
                             "run_id": record["run_id"], "status": record["status"],
                             "path": str(path.relative_to(out))}) + "\n")
        fh.flush()
        os.fsync(fh.fileno())
    return path


def run_bench(config: BenchConfig, resume: bool = True, max_tasks: int | None = None) -> list:
    """Run (or finish) every task and return all records in canonical order.

    ``max_tasks`` stops after that many new tasks, which is how an
    interrupted bench is simulated in tests.
    """
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True))

    tasks = []
    for scenario in config.scenarios:
        for method in config.methods:
            for run_id in range(config.runs):
                path = record_path(out, scenario.label, method.name, run_id)
                if resume and path.exists():
                    continue
                tasks.append((config, scenario, method, run_id))
    if max_tasks is not None:
        tasks = tasks[:max_tasks]
    log.info("bench %s: %d tasks to run", out, len(tasks))

    if config.workers <= 1 or len(tasks) <= 1:
        for task in tasks:
            rec = run_task(*task)
            _write_record(out, rec)
            log.info("%s %s run %d: %s (%.1fs)", rec["scenario"], rec["method"], rec["run_id"], rec["status"], rec["seconds"])
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_run_task_args, task) for task in tasks]
            for fut in as_completed(futures):
                rec = fut.result()
                _write_record(out, rec)
                log.info("%s %s run %d: %s", rec["scenario"], rec["method"], rec["run_id"], rec["status"])
    return load_records(out, config)


def load_records(out, config: BenchConfig | None = None) -> list:
    """Records under ``out`` (restricted to ``config``'s grid when given), sorted."""
    out = Path(out)
    records = []
    if config is not None:
        for scenario in config.scenarios:
            for method in config.methods:
                for run_id in range(config.runs):
                    path = record_path(out, scenario.label, method.name, run_id)
                    if path.exists():
                        records.append(json.loads(path.read_text()))
        return records
    for path in sorted((out / "records").glob("*/*/run_*.json")):
        records.append(json.loads(path.read_text()))
    return records


# --------------------------------------------------------------------------
# aggregation and reporting


@dataclass
class SummaryRow:
    scenario: str
    method: str
    metric: str
    mean: float | None
    se: float | None
    n_runs: int


@dataclass
class Summary:
    rows: list = field(default_factory=list)
    runtime: list = field(default_factory=list)
    failed: int = 0

    def get(self, scenario: str, method: str, metric: str) -> SummaryRow | None:
        for r in self.rows:
            if (r.scenario, r.method, r.metric) == (scenario, method, metric):
                return r
        return None

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "runtime": self.runtime, "failed": self.failed}


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return None, None
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else None
    return mean, se


def aggregate(records) -> Summary:
    """Mean and standard error of each metric per (scenario, method)."""
    groups: dict = {}
    failed = 0
    for rec in records:
        if rec.get("status") != "ok":
            failed += 1
            continue
        groups.setdefault((rec["scenario"], rec["method"]), []).append(rec)
    summary = Summary(failed=failed)
    for (scenario, method) in sorted(groups):
        recs = sorted(groups[(scenario, method)], key=lambda r: r["run_id"])
        for metric in REPORT_METRICS:
            vals = [r["eval"][metric] for r in recs if r["eval"].get(metric) is not None]
            if not vals:
                continue
            mean, se = _mean_se(vals)
            summary.rows.append(SummaryRow(scenario, method, metric, mean, se, len(vals)))
        secs = [r["seconds"] for r in recs]
        summary.runtime.append({"scenario": scenario, "method": method,
                                "mean_seconds": float(np.mean(secs)),
                                "total_seconds": float(np.sum(secs)),
                                "max_seconds": float(np.max(secs)), "n_runs": len(secs)})
    return summary


def _fmt(v):
    return "" if v is None else repr(float(v))


def summary_csv(summary: Summary) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in summary.rows:
        writer.writerow([r.scenario, r.method, r.metric, _fmt(r.mean), _fmt(r.se), r.n_runs])
    return buf.getvalue()


def read_summary_csv(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(SummaryRow(
                scenario=row["scenario"], method=row["method"], metric=row["metric"],
                mean=float(row["mean"]) if row["mean"] else None,
                se=float(row["se"]) if row["se"] else None,
                n_runs=int(row["n_runs"]),
            ))
    return rows


def _bar_panel_svg(x0, y0, w, h, title, bars, ref, ymax):
    """One panel: bars (label, value, se) plus a dashed reference line."""
    parts = [f'<g class="panel" transform="translate({x0},{y0})">',
             f'<text x="{w / 2:.1f}" y="-8" text-anchor="middle" font-size="11">{title}</text>',
             f'<rect x="0" y="0" width="{w}" height="{h}" fill="none" stroke="#444"/>']
    n = max(len(bars), 1)
    slot = w / n
    for k, (label, value, se) in enumerate(bars):
        if value is None:
            continue
        bh = h * min(value, ymax) / ymax
        bx = k * slot + slot * 0.15
        parts.append(f'<rect x="{bx:.1f}" y="{h - bh:.1f}" width="{slot * 0.7:.1f}" height="{bh:.1f}" fill="#4c72b0"/>')
        if se:
            lo = h - h * min(value - se, ymax) / ymax
            hi = h - h * min(value + se, ymax) / ymax
            cx = k * slot + slot / 2
            parts.append(f'<line x1="{cx:.1f}" y1="{lo:.1f}" x2="{cx:.1f}" y2="{hi:.1f}" stroke="#000"/>')
        parts.append(f'<text x="{k * slot + slot / 2:.1f}" y="{h + 12}" text-anchor="middle" font-size="9">{label}</text>')
    ry = h - h * ref / ymax
    parts.append(f'<line class="reference" x1="0" y1="{ry:.1f}" x2="{w}" y2="{ry:.1f}" '
                 f'stroke="#c44e52" stroke-dasharray="5,4"/>')
    parts.append("</g>")
    return "\n".join(parts)


def metric_svg(summary: Summary, metric: str, ref: float, ymax: float) -> str:
    scenarios = sorted({r.scenario for r in summary.rows if r.metric == metric})
    pw, ph, pad = 220, 160, 40
    width = max(1, len(scenarios)) * (pw + pad) + pad
    height = ph + 2 * pad + 20
    body = []
    for k, scenario in enumerate(scenarios):
        bars = [(r.method, r.mean, r.se) for r in summary.rows if r.scenario == scenario and r.metric == metric]
        body.append(_bar_panel_svg(pad + k * (pw + pad), pad, pw, ph, scenario, bars, ref, ymax))
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
            f'<title>{metric}</title>\n' + "\n".join(body) + "\n</svg>\n")


def emit_report(summary: Summary, out, formats=("csv", "json", "svg")) -> dict:
    """Write summary.csv / summary.json / runtime.csv and the two SVG panels.

    ``summary.csv`` holds only run-invariant numbers (wall time lives in
    ``runtime.csv``), so identical configs give byte-identical files.
    """
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    written = {}
    if "csv" in formats:
        p = out / "summary.csv"
        p.write_text(summary_csv(summary))
        written["csv"] = p
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "method", "mean_seconds", "total_seconds", "max_seconds", "n_runs"])
        for r in summary.runtime:
            w.writerow([r["scenario"], r["method"], _fmt(r["mean_seconds"]), _fmt(r["total_seconds"]),
                        _fmt(r["max_seconds"]), r["n_runs"]])
        (out / "runtime.csv").write_text(buf.getvalue())
        written["runtime"] = out / "runtime.csv"
    if "json" in formats:
        p = out / "summary.json"
        p.write_text(json.dumps(summary.to_dict(), indent=2))
        written["json"] = p
    if "svg" in formats:
        written["type1_svg"] = out / "type1_error.svg"
        written["type1_svg"].write_text(metric_svg(summary, "type1_error", ref=0.05, ymax=1.0))
        written["auc_svg"] = out / "auc.svg"
        written["auc_svg"].write_text(metric_svg(summary, "auc", ref=0.5, ymax=1.0))
    return written

import json

import pytest

from condimp import bench
from condimp.bench import BenchConfig, MethodSpec, aggregate, emit_report, load_records, run_bench, summary_csv


def tiny_config(out, **kw):
    base = dict(
        scenarios=[{"scenario": "exp1", "n": 60, "p": 50, "rho": 0.5}],
        methods=["cpi-rf", "pi-rf", "marginal"],
        runs=3, B=2, seed=5, out=str(out), sampler_trees=5,
        rf={"n_trees": 10},
    )
    base.update(kw)
    return BenchConfig.from_dict(base)


def test_method_tags():
    m = MethodSpec.parse("cpi-mlp")
    assert (m.method, m.learner) == ("cpi", "mlp")
    assert MethodSpec.parse("marginal").learner is None
    d = MethodSpec.parse({"name": "cpi-d1", "method": "cpi", "learner": "mlp", "depth_grid": [1]})
    assert d.depth_grid == (1,)
    assert MethodSpec.parse({"method": "cpi", "depth_grid": [2, -1]}).depth_grid == (2, None)
    with pytest.raises(ValueError):
        MethodSpec.parse("knockoff-mlp")
    with pytest.raises(ValueError):
        MethodSpec.parse("cpi-svm")


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        tiny_config(tmp_path, runs=0)
    with pytest.raises(ValueError):
        tiny_config(tmp_path, methods=["pi-rf", "pi-rf"])


def test_records_index_and_reproducibility(tmp_path):
    a = run_bench(tiny_config(tmp_path / "a"))
    b = run_bench(tiny_config(tmp_path / "b"))
    assert len(a) == 9 and all(r["status"] == "ok" for r in a)
    index = [json.loads(line) for line in (tmp_path / "a" / "index.jsonl").read_text().splitlines()]
    assert len(index) == 9
    assert summary_csv(aggregate(a)) == summary_csv(aggregate(b))
    # CPI and PI share the fitted learner, so they see the same data and seed trail for it
    cpi = [r for r in a if r["method"] == "cpi-rf"][0]
    pi = [r for r in a if r["method"] == "pi-rf"][0]
    assert cpi["seed_trail"]["learner"] == pi["seed_trail"]["learner"]


def test_resume_after_interruption(tmp_path):
    full = run_bench(tiny_config(tmp_path / "full"))
    cfg = tiny_config(tmp_path / "cut")
    partial = run_bench(cfg, max_tasks=4)
    assert len(partial) == 4
    resumed = run_bench(cfg)
    assert len(resumed) == 9
    lines = (tmp_path / "cut" / "index.jsonl").read_text().splitlines()
    assert len(lines) == 9  # nothing recomputed
    assert summary_csv(aggregate(full)) == summary_csv(aggregate(resumed))


def test_failed_run_is_recorded(tmp_path, monkeypatch):
    real = bench.simulate

    def flaky(spec, rng):
        X, y, truth = real(spec, rng)
        if flaky.calls == 1:
            flaky.calls += 1
            raise RuntimeError("boom")
        flaky.calls += 1
        return X, y, truth

    flaky.calls = 0
    monkeypatch.setattr(bench, "simulate", flaky)
    records = run_bench(tiny_config(tmp_path, methods=["marginal"]))
    status = [r["status"] for r in records]
    assert status.count("failed") == 1 and status.count("ok") == 2
    bad = [r for r in records if r["status"] == "failed"][0]
    assert "boom" in bad["error"]
    assert aggregate(records).failed == 1


def test_aggregate_statistics():
    recs = [{"status": "ok", "scenario": "s", "method": "m", "run_id": k, "seconds": 1.0 + k,
             "eval": {"auc": a, "type1_error": 0.0, "power": None}} for k, a in enumerate([0.6, 0.8])]
    s = aggregate(recs)
    row = s.get("s", "m", "auc")
    assert row.mean == pytest.approx(0.7) and row.se == pytest.approx(0.1) and row.n_runs == 2
    assert s.get("s", "m", "power") is None
    single = aggregate(recs[:1]).get("s", "m", "auc")
    assert single.se is None
    assert ",," in summary_csv(aggregate(recs[:1]))
    assert sum(r["seconds"] for r in recs) >= max(r["seconds"] for r in recs)
    assert s.runtime[0]["total_seconds"] == pytest.approx(3.0)


def test_empty_and_report_files(tmp_path):
    empty = aggregate([])
    assert summary_csv(empty) == "scenario,method,metric,mean,se,n_runs\n"
    records = run_bench(tiny_config(tmp_path / "b", runs=2))
    written = emit_report(aggregate(records), tmp_path / "rep")
    assert set(written) == {"csv", "runtime", "json", "type1_svg", "auc_svg"}
    svg = written["type1_svg"].read_text()
    assert svg.startswith("<svg") and 'class="reference"' in svg and "stroke-dasharray" in svg
    assert "seconds" not in written["csv"].read_text()
    assert len(load_records(tmp_path / "b")) == len(records)


def test_report_to_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(aggregate([]), blocker / "sub")


def test_parallel_matches_serial(tmp_path):
    serial = run_bench(tiny_config(tmp_path / "s", runs=2))
    parallel = run_bench(tiny_config(tmp_path / "p", runs=2, workers=2))
    assert summary_csv(aggregate(serial)) == summary_csv(aggregate(parallel))

"""A small seeded benchmark, end to end.

Three runs of the `exp1` design at two correlation levels, with
CPI, PI and marginal screening.  Records land in ``demo_bench/records``;
re-running the script resumes instead of recomputing, and the summary
CSV comes out byte-identical.

Run:  python demos/03_mini_bench.py
"""

from pathlib import Path

from condimp.bench import BenchConfig, aggregate, emit_report, run_bench

config = BenchConfig.from_dict({
    "scenarios": [{"scenario": "exp1", "n": 200, "p": 50, "rho": rho} for rho in (0.0, 0.8)],
    "methods": ["cpi-rf", "pi-rf", "marginal"],
    "runs": 3,
    "B": 10,
    "seed": 0,
    "out": "demo_bench",
    "sampler_trees": 30,
    "rf": {"n_trees": 60},
})
records = run_bench(config)
written = emit_report(aggregate(records), Path(config.out) / "report")
print(written["csv"].read_text())
print("plots:", written["type1_svg"], written["auc_svg"])

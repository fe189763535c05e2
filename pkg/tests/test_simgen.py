import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from condimp.simgen import (
    COEF_VALUES,
    EXP1_SIGNALS,
    GroundTruth,
    ScenarioSpec,
    build_block_covariance,
    draw_beta_quad,
    exp1_signal,
    gen_outcome_exp1,
    gen_outcome_scenario,
    noise_scale,
    normal_cdf,
    quad,
    sample_gaussian_design,
    simulate,
    write_dataset,
)


def test_block_covariance_layout():
    cov = build_block_covariance(50, 10, 0.8)
    assert cov.shape == (50, 50)
    assert np.allclose(np.diag(cov), 1.0)
    assert cov[0, 4] == 0.8 and cov[0, 5] == 0.0 and cov[45, 49] == 0.8


@given(st.integers(1, 8), st.integers(1, 6), st.floats(0.0, 0.99))
@settings(max_examples=60, deadline=None)
def test_block_covariance_positive_definite(size, blocks, rho):
    cov = build_block_covariance(size * blocks, blocks, rho)
    assert np.allclose(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() > 0


@pytest.mark.parametrize("p,blocks,rho", [(10, 3, 0.1), (10, 5, 1.0), (10, 5, -0.1)])
def test_block_covariance_rejects(p, blocks, rho):
    with pytest.raises(ValueError):
        build_block_covariance(p, blocks, rho)


def test_design_empirical_correlation():
    X = sample_gaussian_design(ScenarioSpec(n=20000, p=10, rho=0.6, n_blocks=2, seed=4))
    C = np.corrcoef(X, rowvar=False)
    assert abs(C[0, 1] - 0.6) < 0.03
    assert abs(C[0, 7]) < 0.03


def test_exp1_formula_pinned_noise():
    X = np.zeros((2, 50))
    X[1, [0, 10, 20, 30, 40]] = [1.0, 1.0, 0.0, 2.0, 3.0]
    y, truth = gen_outcome_exp1(X, noise=np.zeros(2))
    # hand-evaluated: row 0 -> 2 log 2, row 1 -> 1 + 2 log 4 + 6
    assert y == pytest.approx([2 * math.log(2.0), 7.0 + 2 * math.log(4.0)], abs=1e-12)
    assert np.flatnonzero(truth.support).tolist() == list(EXP1_SIGNALS)


def test_exp1_needs_41_columns():
    with pytest.raises(ValueError):
        gen_outcome_exp1(np.zeros((3, 40)), noise=np.zeros(3))


def test_scenario_coefficients_and_support(rng):
    spec = ScenarioSpec("main_plus_interactions", n=200, p=50, n_signal=6)
    X = sample_gaussian_design(spec, rng)
    y, truth = gen_outcome_scenario(X, spec, rng)
    assert truth.support[:6].all() and not truth.support[6:].any()
    assert set(truth.beta_main[:6]) <= set(COEF_VALUES)
    assert np.all(truth.beta_main[6:] == 0)
    assert len(truth.beta_quad) == 15


def test_noise_scale_matches_snr(rng):
    spec = ScenarioSpec("plain_linear", n=400, p=20, n_blocks=4, snr=2.0)
    X = sample_gaussian_design(spec, rng)
    beta = np.zeros(20)
    beta[:3] = [1.0, -2.0, 0.5]
    eps = rng.standard_normal(400)
    y, _ = gen_outcome_scenario(X, spec, beta_main=beta, noise=eps)
    signal = X @ beta
    sigma = np.linalg.norm(signal) / (2.0 * math.sqrt(400))
    assert np.allclose(y, signal + sigma * eps)
    assert noise_scale(signal, 2.0) == pytest.approx(sigma)


def test_relu_and_interactions(rng):
    X = rng.standard_normal((50, 10))
    spec = ScenarioSpec("relu_linear", n=50, p=10, n_blocks=2, n_signal=3)
    y, _ = gen_outcome_scenario(X, spec, rng)
    assert y.min() >= 0.0
    bq = {(0, 1): 2.0, (1, 2): -0.5}
    assert np.allclose(quad(X, bq), 2 * X[:, 0] * X[:, 1] - 0.5 * X[:, 1] * X[:, 2])
    assert sorted(draw_beta_quad(rng, 4)) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def test_classification_probit(rng):
    spec = ScenarioSpec("classification", n=5, p=10, n_blocks=2, n_signal=2)
    X = rng.standard_normal((5, 10))
    beta = np.zeros(10)
    beta[:2] = [1.0, -1.0]
    u = np.full(5, 0.5)
    y, _ = gen_outcome_scenario(X, spec, beta_main=beta, noise=u)
    assert np.array_equal(y, (X @ beta > 0).astype(float))
    assert normal_cdf(1.6448536269514722) == pytest.approx(0.95, abs=1e-12)


def test_simulate_deterministic_and_streams_differ():
    spec = ScenarioSpec("plain_linear", n=30, p=10, n_blocks=2, n_signal=3, seed=9)
    a = simulate(spec)
    b = simulate(spec)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    c = simulate(ScenarioSpec("plain_linear", n=30, p=10, n_blocks=2, n_signal=3, seed=10))
    assert not np.array_equal(a[0], c[0])


def test_null_scenario():
    X, y, truth = simulate(ScenarioSpec("null", n=40, p=20, n_blocks=4))
    assert not truth.support.any()
    assert X.shape == (40, 20)


@pytest.mark.parametrize("kwargs", [
    {"scenario": "nope"}, {"scenario": "exp1", "n_signal": 3}, {"p": 51},
    {"snr": 0.0}, {"rho": 1.0}, {"scenario": "plain_linear", "n_signal": 60},
])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        ScenarioSpec(**kwargs)


def test_write_dataset_roundtrip(tmp_path):
    spec = ScenarioSpec("main_plus_interactions", n=12, p=10, n_blocks=2, n_signal=3, seed=2)
    X, y, truth = simulate(spec)
    csv_path, sidecar = write_dataset(tmp_path / "d.csv", X, y, truth, spec)
    header = csv_path.read_text().splitlines()[0]
    assert header == ",".join([f"x{k}" for k in range(1, 11)] + ["y"])
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    assert np.array_equal(data[:, :-1], X) and np.array_equal(data[:, -1], y)
    meta = json.loads(sidecar.read_text())
    assert set(meta["beta_quad"]) == {"1,2", "1,3", "2,3"}
    back = GroundTruth.from_dict(meta)
    assert back.beta_quad == truth.beta_quad
    assert meta["spec"]["seed"] == 2


def test_exp1_signal_uses_only_support(rng):
    X = rng.standard_normal((20, 50))
    Z = X.copy()
    others = [k for k in range(50) if k not in EXP1_SIGNALS]
    Z[:, others] = rng.standard_normal((20, len(others)))
    assert np.array_equal(exp1_signal(X), exp1_signal(Z))

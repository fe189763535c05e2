import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from condimp.condsampler import fit_conditional, reconstruct_additive, select_depth
from condimp.learners import ForestConfig

SMALL = ForestConfig(n_trees=20)


def correlated(rng, n=120):
    z = rng.standard_normal(n)
    X = np.column_stack([z + 0.3 * rng.standard_normal(n), z, rng.standard_normal(n)])
    return X


def test_additive_identity_permutation_returns_column(rng):
    X = correlated(rng)
    s = fit_conditional(X, 0, rng=rng, forest_config=SMALL)
    assert np.allclose(reconstruct_additive(s, perm=np.arange(len(X))), X[:, 0])


@given(st.integers(0, 1000))
@settings(max_examples=15, deadline=None)
def test_additive_keeps_fitted_values_and_residual_multiset(seed):
    rng = np.random.default_rng(seed)
    X = correlated(rng, 60)
    s = fit_conditional(X, 1, depth_grid=(2,), rng=rng, forest_config=ForestConfig(n_trees=5))
    x = s.sample(rng)
    assert np.allclose(np.sort(x - s.xhat), np.sort(s.residuals))


def test_conditional_copy_tracks_other_columns(rng):
    X = correlated(rng, 400)
    s = fit_conditional(X, 0, rng=rng, forest_config=SMALL)
    xt = s.sample(rng)
    assert np.corrcoef(xt, X[:, 1])[0, 1] > 0.8
    shuffled = rng.permutation(X[:, 0])
    assert abs(np.corrcoef(shuffled, X[:, 1])[0, 1]) < 0.2


def test_leaf_sampling_draws_stored_values(rng):
    X = correlated(rng)
    s = fit_conditional(X, 0, rng=rng, construction="leaf_sampling", forest_config=SMALL)
    xt = s.sample(rng)
    assert np.isin(xt, X[:, 0]).all()
    assert np.corrcoef(xt, X[:, 1])[0, 1] > 0.5


def test_depth_selection_prefers_deep_for_nonlinear(rng):
    Xr = rng.uniform(-3, 3, size=(400, 2))
    xj = np.sin(2 * Xr[:, 0]) * Xr[:, 1] + 0.05 * rng.standard_normal(400)
    depth, cv = select_depth(Xr, xj, (1, None), SMALL, rng)
    assert depth is None and cv["None"] < cv["1"]
    depth, cv = select_depth(Xr, xj, (3,), SMALL, rng)
    assert depth == 3 and cv == {}


def test_separate_fit_rows(rng):
    X = correlated(rng)
    Xf = correlated(rng)
    s = fit_conditional(X, 2, depth_grid=(2,), rng=rng, forest_config=SMALL, X_fit=Xf)
    assert np.array_equal(s.fit_values, Xf[:, 2])
    assert np.allclose(s.x_j, X[:, 2])


def test_validation(rng):
    with pytest.raises(ValueError):
        fit_conditional(rng.standard_normal((20, 1)), 0, rng=rng)
    with pytest.raises(ValueError):
        fit_conditional(rng.standard_normal((20, 3)), 0, rng=rng, construction="swap")
    with pytest.raises(IndexError):
        fit_conditional(rng.standard_normal((20, 3)), 5, rng=rng)
    s = fit_conditional(rng.standard_normal((20, 3)), 0, depth_grid=(1,), rng=rng, forest_config=ForestConfig(n_trees=2))
    with pytest.raises(ValueError):
        reconstruct_additive(s, perm=np.zeros(20, dtype=int))


def linear_conditional(rng, n=2000):
    X_rest = rng.standard_normal((n, 3))
    xj = X_rest @ np.array([1.0, -0.5, 0.0]) + 0.7 * rng.standard_normal(n)
    return np.column_stack([xj, X_rest])


@pytest.fixture(scope="module")
def linear_sampler():
    rng = np.random.default_rng(77)
    X = linear_conditional(rng)
    return X, fit_conditional(X, 0, rng=rng, forest_config=ForestConfig(n_trees=50))


def test_additive_preserves_correlation_with_fit(linear_sampler):
    X, s = linear_sampler
    rng = np.random.default_rng(1)
    target = np.corrcoef(X[:, 0], s.xhat)[0, 1]
    shuffled = np.mean([np.corrcoef(s.sample(rng), s.xhat)[0, 1] for _ in range(100)])
    assert abs(shuffled - target) < 0.05


def test_additive_retains_linear_dependence(linear_sampler):
    X, s = linear_sampler
    rng = np.random.default_rng(2)
    A = np.column_stack([np.ones(len(X)), X[:, 1:]])
    coef, res, *_ = np.linalg.lstsq(A, X[:, 0], rcond=None)
    se = np.sqrt(res[0] / (len(X) - 4) * np.diag(np.linalg.inv(A.T @ A)))
    coef_t = np.linalg.lstsq(A, s.sample(rng), rcond=None)[0]
    assert np.all(np.abs(coef_t[1:] - coef[1:]) <= 2 * se[1:])


def test_independent_shuffles_exchangeable(linear_sampler):
    _, s = linear_sampler
    a = s.sample(np.random.default_rng(3))
    b = s.sample(np.random.default_rng(4))
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_leaf_sampling_single_leaf_is_marginal_resampling(rng):
    X = rng.standard_normal((2000, 3))
    s = fit_conditional(X, 0, depth_grid=(0,), rng=rng, construction="leaf_sampling",
                        forest_config=ForestConfig(n_trees=1, bootstrap=False))
    xt = s.sample(rng)
    assert np.isin(xt, X[:, 0]).all()
    assert stats.ks_2samp(xt, X[:, 0]).statistic < 0.05


def test_leaf_sampling_independent_column_keeps_marginal(rng):
    X = rng.standard_normal((2000, 3))
    s = fit_conditional(X, 0, rng=rng, construction="leaf_sampling", forest_config=ForestConfig(n_trees=30))
    assert stats.ks_2samp(s.sample(rng), X[:, 0]).statistic < 0.05

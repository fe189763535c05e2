import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from condimp.learners import Dataset, ForestConfig, fit_random_forest
from condimp.learners.forest import PROBA_CLIP


def brute_force_stump(X, y, min_leaf):
    """Best variance split over every feature and midpoint, by enumeration."""
    best = (np.sum((y - y.mean()) ** 2), None, None)
    for f in range(X.shape[1]):
        xs = np.unique(X[:, f])
        for a, b in zip(xs[:-1], xs[1:]):
            thr = 0.5 * (a + b)
            left = X[:, f] <= thr
            if left.sum() < min_leaf or (~left).sum() < min_leaf:
                continue
            sse = np.sum((y[left] - y[left].mean()) ** 2) + np.sum((y[~left] - y[~left].mean()) ** 2)
            if sse < best[0] - 1e-12:
                best = (sse, f, thr)
    return best


def stump_config(min_leaf=2):
    return ForestConfig(n_trees=1, max_depth=1, min_leaf=min_leaf, bootstrap=False, max_features="all")


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_stump_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((12, 3))
    y = rng.standard_normal(12)
    model = fit_random_forest(Dataset(X, y), stump_config(), rng)
    _, f, thr = brute_force_stump(X, y, 2)
    left = X[:, f] <= thr
    expected = np.where(left, y[left].mean(), y[~left].mean())
    assert np.allclose(model.predict(X), expected, atol=1e-12)


def test_step_function_recovered(rng):
    X = rng.uniform(-1, 1, size=(200, 4))
    y = np.where(X[:, 2] > 0.3, 5.0, -1.0)
    model = fit_random_forest(Dataset(X, y), ForestConfig(n_trees=1, bootstrap=False, max_features="all", min_leaf=1), rng)
    assert model.feature[0] == 2
    assert np.allclose(model.predict(X), y)


@pytest.mark.parametrize("depth", [0, 1, 2, 5])
def test_truncation_equals_depth_limited_growth(depth):
    rng = np.random.default_rng(depth)
    X = rng.standard_normal((150, 6))
    y = X[:, 0] ** 2 + np.sin(3 * X[:, 1]) + 0.1 * rng.standard_normal(150)
    data = Dataset(X, y)
    deep = fit_random_forest(data, ForestConfig(n_trees=15), np.random.default_rng(7))
    shallow = fit_random_forest(data, ForestConfig(n_trees=15, max_depth=depth), np.random.default_rng(7))
    Xt = rng.standard_normal((40, 6))
    assert np.allclose(deep.predict(Xt, max_depth=depth), shallow.predict(Xt), atol=1e-12)


def test_leaf_members_and_bounds(rng):
    X = rng.standard_normal((60, 5))
    y = rng.standard_normal(60)
    model = fit_random_forest(Dataset(X, y), ForestConfig(n_trees=5, min_leaf=4), rng)
    pred = model.predict(rng.standard_normal((30, 5)))
    assert pred.min() >= y.min() and pred.max() <= y.max()
    leaves = model.apply(X)
    assert leaves.shape == (60, 5)
    for t in range(5):
        node = int(leaves[0, t])
        rows = model.leaf_members(node)
        assert len(rows) >= 4
        value = model.value[node]
        assert value == pytest.approx(y[rows].mean())


def test_binary_scores_are_clipped_logits(rng):
    X = rng.standard_normal((80, 3))
    y = (X[:, 0] > 0).astype(float)
    model = fit_random_forest(Dataset(X, y, "binary"), ForestConfig(n_trees=10, min_leaf=2), rng)
    p = model.predict(X)
    assert p.min() >= 0 and p.max() <= 1
    s = model.predict_score(X)
    bound = np.log((1 - PROBA_CLIP) / PROBA_CLIP)
    assert np.all(np.abs(s) <= bound + 1e-12)
    assert np.mean((s > 0) == (y == 1)) > 0.9


def test_same_seed_same_forest():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((50, 4))
    y = rng.standard_normal(50)
    a = fit_random_forest(Dataset(X, y), ForestConfig(n_trees=4), np.random.default_rng(3))
    b = fit_random_forest(Dataset(X, y), ForestConfig(n_trees=4), np.random.default_rng(3))
    assert np.array_equal(a.predict(X), b.predict(X))


def test_fit_validation(rng):
    X = rng.standard_normal((6, 2))
    with pytest.raises(ValueError):
        fit_random_forest(Dataset(X, X[:, 0]), ForestConfig(min_leaf=5))
    with pytest.raises(ValueError):
        fit_random_forest(Dataset(X, X[:, 0]), ForestConfig(n_trees=0, min_leaf=1))
    model = fit_random_forest(Dataset(X, X[:, 0]), ForestConfig(n_trees=2, min_leaf=1), rng)
    with pytest.raises(ValueError):
        model.predict(np.zeros((3, 5)))

"""Conditionally permuted copies of one column.

A random forest regresses ``x^j`` on the remaining columns.  A perturbed
column is then either

* ``additive``: fitted values plus a random permutation of the residuals, or
* ``leaf_sampling``: for each row, a random tree routes the row's other
  columns to a leaf and one of the training values of ``x^j`` stored in that
  leaf is drawn.

Either way the dependence of ``x^j`` on the other columns is kept while the
part of ``x^j`` they do not explain is scrambled.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import as_generator, child
from .learners.data import Dataset
from .learners.forest import ForestConfig, RandomForestModel, fit_random_forest
from .learners.selection import split_two_folds

CONSTRUCTIONS = ("additive", "leaf_sampling")
DEPTH_GRID = (2, 5, 10, None)


@dataclass
class ConditionalSampler:
    j: int
    forest: RandomForestModel
    depth: int | None
    x_j: np.ndarray
    xhat: np.ndarray
    residuals: np.ndarray
    X_rest: np.ndarray = field(repr=False)
    fit_values: np.ndarray = field(repr=False)
    construction: str = "additive"
    cv_loss: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.x_j.shape[0]

    def sample(self, rng) -> np.ndarray:
        if self.construction == "additive":
            return reconstruct_additive(self, rng)
        return reconstruct_leaf_sampling(self, rng)


def select_depth(X_rest, x_j, depth_grid, config: ForestConfig, rng):
    """Depth with the lowest 2-fold CV mean squared error (ties: first in grid).

    One unrestricted forest is grown per fold and read at every candidate
    depth, which gives the same predictions as growing one forest per depth.
    """
    depth_grid = list(depth_grid)
    if len(depth_grid) == 1:
        return depth_grid[0], {}
    folds = split_two_folds(len(x_j), child(rng, "cv-split"))
    sse = np.zeros(len(depth_grid))
    for k in (0, 1):
        tr, te = folds == k, folds != k
        forest = fit_random_forest(Dataset(X_rest[tr], x_j[tr]), replace(config, max_depth=None), child(rng, "cv-fit", k))
        for d, depth in enumerate(depth_grid):
            pred = forest.predict(X_rest[te], max_depth=depth)
            sse[d] += np.sum((x_j[te] - pred) ** 2)
    mse = sse / len(x_j)
    best = int(np.argmin(mse))
    return depth_grid[best], {str(d): float(m) for d, m in zip(depth_grid, mse)}


def fit_conditional(X, j: int, depth_grid=DEPTH_GRID, rng=None, construction: str = "additive",
                    forest_config: ForestConfig | None = None, X_fit=None) -> ConditionalSampler:
    """Fit the model of ``x^j`` given the other columns.

    The forest is trained on the evaluation rows ``X`` themselves unless
    ``X_fit`` supplies separate rows (e.g. the training fold).  Fitted values
    and residuals always refer to the rows of ``X``.
    """
    if construction not in CONSTRUCTIONS:
        raise ValueError(f"construction must be one of {CONSTRUCTIONS}")
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if p < 2:
        raise ValueError("no other columns to condition on; use marginal permutation importance instead")
    if not 0 <= j < p:
        raise IndexError(f"column {j} out of range for {p} columns")
    rng = as_generator(rng)
    config = forest_config or ForestConfig()
    X_fit = X if X_fit is None else np.asarray(X_fit, dtype=np.float64)
    if X_fit.shape[0] < 4:
        raise ValueError("need at least 4 rows to fit a conditional sampler")
    if X_fit.shape[1] != p:
        raise ValueError("X_fit must have the same columns as X")

    rest_fit = np.delete(X_fit, j, axis=1)
    xj_fit = X_fit[:, j].copy()
    depth, cv = select_depth(rest_fit, xj_fit, depth_grid, config, child(rng, "depth"))
    forest = fit_random_forest(Dataset(rest_fit, xj_fit), replace(config, max_depth=depth), child(rng, "forest"))

    X_rest = np.ascontiguousarray(np.delete(X, j, axis=1))
    x_j = X[:, j].copy()
    xhat = forest.predict(X_rest)
    return ConditionalSampler(
        j=j,
        forest=forest,
        depth=depth,
        x_j=x_j,
        xhat=xhat,
        residuals=x_j - xhat,
        X_rest=X_rest,
        fit_values=xj_fit,
        construction=construction,
        cv_loss=cv,
    )


def reconstruct_additive(s: ConditionalSampler, rng=None, perm=None) -> np.ndarray:
    """Fitted values plus permuted residuals; ``perm`` pins the permutation."""
    if perm is None:
        perm = as_generator(rng).permutation(s.n)
    else:
        perm = np.asarray(perm)
        if perm.shape != (s.n,) or not np.array_equal(np.sort(perm), np.arange(s.n)):
            raise ValueError("perm must be a permutation of range(n)")
    return s.xhat + s.residuals[perm]


def reconstruct_leaf_sampling(s: ConditionalSampler, rng=None) -> np.ndarray:
    """One stored value of ``x^j`` per row, from the leaf of a random tree."""
    from .learners import _cart

    rng = as_generator(rng)
    f = s.forest
    tree_pick = rng.integers(0, f.n_trees, size=s.n)
    member_u = rng.random(s.n)
    rows = _cart.sample_leaves(s.X_rest, f.offsets, f.feature, f.threshold, f.left, f.right,
                               f.depth, -1, f.start, f.end, f.member_offsets, f.members,
                               tree_pick.astype(np.int64), member_u)
    return s.fit_values[rows]

"""Hyperparameter tuning, 2-fold cross-fitting and held-out prediction scores."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .._rng import as_generator, child
from .data import Dataset
from .forest import ForestConfig, fit_random_forest
from .mlp import DEFAULT_GRID, MlpConfig, fit_mlp

LEARNERS = ("mlp", "rf")


def _fit_config(config, data: Dataset, rng):
    if isinstance(config, MlpConfig):
        return fit_mlp(data, config, rng=rng)
    if isinstance(config, ForestConfig):
        return fit_random_forest(data, config, rng=rng)
    raise TypeError(f"unsupported learner config {type(config).__name__}")


def validation_loss(model, data: Dataset) -> float:
    """Unpenalised loss of ``model`` on ``data`` (MSE, or logistic loss on logits)."""
    out = model.predict_score(data.X)
    if data.task == "binary":
        return float(np.mean(np.logaddexp(0.0, out) - data.y * out))
    return float(np.mean((data.y - out) ** 2))


def split_two_folds(n: int, rng) -> np.ndarray:
    """Random 0/1 fold labels, sizes differing by at most one."""
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    labels = np.arange(n) % 2
    return rng.permutation(labels)


def tune_hyperparams(data: Dataset, grid: Sequence, rng=None, fit: Callable | None = None):
    """Config with the lowest mean validation loss over an inner 2-fold split.

    Both halves of the split serve once as validation set.  Ties keep the
    earliest config in ``grid``.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be non-empty")
    if len(grid) == 1:
        return grid[0]
    rng = as_generator(rng)
    fit = fit or _fit_config
    folds = split_two_folds(data.n, child(rng, "inner-split"))
    best, best_loss = grid[0], np.inf
    for g, config in enumerate(grid):
        losses = []
        for k in (0, 1):
            train = data.subset(folds == k)
            valid = data.subset(folds != k)
            model = fit(config, train, child(rng, "inner-fit", g, k))
            losses.append(validation_loss(model, valid))
        loss = float(np.mean(losses))
        if loss < best_loss:
            best, best_loss = config, loss
    return best


@dataclass(frozen=True)
class LearnerSpec:
    """Which base learner to use and which configs to tune over."""

    kind: str = "mlp"
    grid: tuple = ()

    def __post_init__(self):
        if self.kind not in LEARNERS:
            raise ValueError(f"learner must be one of {LEARNERS}, got {self.kind!r}")
        if not self.grid:
            default = DEFAULT_GRID if self.kind == "mlp" else (ForestConfig(),)
            object.__setattr__(self, "grid", tuple(default))

    def fit(self, data: Dataset, rng):
        """Tune on ``data`` (when the grid has several points), then refit on all of it."""
        rng = as_generator(rng)
        config = tune_hyperparams(data, self.grid, child(rng, "tune"))
        return _fit_config(config, data, child(rng, "final"))


@dataclass
class CrossfitSplit:
    """Two models, each trained on one fold and evaluated on the other.

    ``folds[i]`` is the fold that row ``i`` belongs to; ``models[k]`` was
    trained on the rows of fold ``k`` and therefore predicts rows of fold
    ``1 - k``.
    """

    folds: np.ndarray
    models: list

    def train_rows(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.folds == k)

    def test_rows(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.folds != k)

    def evaluating_model(self, i: int):
        return self.models[1 - int(self.folds[i])]

    def predict_oof(self, X) -> np.ndarray:
        """Out-of-fold scores for rows aligned with the original data."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] != self.folds.shape[0]:
            raise ValueError("rows must align with the cross-fitted data")
        out = np.empty(X.shape[0])
        for k in (0, 1):
            rows = self.test_rows(k)
            out[rows] = self.models[k].predict_score(X[rows])
        return out


def make_crossfit(data: Dataset, rng=None, fit: Callable | None = None, learner: LearnerSpec | None = None) -> CrossfitSplit:
    """Random 50/50 partition with one model trained per fold.

    ``fit(train_data, rng)`` builds a model; by default ``learner.fit`` of an
    MLP :class:`LearnerSpec` (inner tuning included).
    """
    if data.n < 4:
        raise ValueError("cross-fitting needs at least 4 rows")
    rng = as_generator(rng)
    if fit is None:
        fit = (learner or LearnerSpec()).fit
    folds = split_two_folds(data.n, child(rng, "crossfit-split"))
    models = [fit(data.subset(folds == k), child(rng, "crossfit-fit", k)) for k in (0, 1)]
    return CrossfitSplit(folds=folds, models=models)


def prediction_score(model, test: Dataset) -> float:
    """R^2 for regression, ROC-AUC of sigmoid outputs for binary tasks."""
    from ..metrics import roc_auc

    out = model.predict_score(test.X)
    if test.task == "binary":
        return roc_auc(1.0 / (1.0 + np.exp(-out)), test.y)
    ss_tot = float(np.sum((test.y - test.y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("R^2 is undefined for a constant test target")
    return 1.0 - float(np.sum((test.y - out) ** 2)) / ss_tot

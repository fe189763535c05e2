"""Variable importance estimators and their Wald-type p-values.

All permutation-style estimators share one pipeline: replace column ``j`` of
the evaluation rows by ``B`` perturbed copies, score each copy with the
fitted learner, and record the per-row loss increase.  The resulting
``n x B`` loss matrix is averaged over copies per row, then over rows; the
spread of the row averages gives the standard error.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats
from scipy.special import erfc

from ._rng import as_generator, child
from .condsampler import DEPTH_GRID, ConditionalSampler, fit_conditional, reconstruct_additive
from .learners.data import Dataset
from .learners.forest import ForestConfig
from .learners.selection import CrossfitSplit, _fit_config

METHODS = ("cpi", "pi", "loco", "marginal")
Z_MODES = ("se", "literal")
DEFAULT_B = 50


@dataclass
class VariableImportance:
    variable: int
    mean: float
    std: float
    z: float
    pvalue: float
    method: str
    degenerate_variance: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def flags(self) -> list[str]:
        return ["degenerate_variance"] if self.degenerate_variance else []

    def to_dict(self) -> dict:
        def clean(v):
            return v if isinstance(v, (int, bool)) or (isinstance(v, float) and math.isfinite(v)) else None

        return {
            "variable": self.variable,
            "mean": clean(float(self.mean)),
            "std": clean(float(self.std)),
            "z": clean(float(self.z)),
            "pvalue": float(self.pvalue),
            "flags": self.flags,
            **({"extra": self.extra} if self.extra else {}),
        }


@dataclass
class ImportanceReport:
    method: str
    entries: list
    meta: dict = field(default_factory=dict)
    losses: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, k) -> VariableImportance:
        return self.entries[k]

    @property
    def pvalues(self) -> np.ndarray:
        return np.array([e.pvalue for e in self.entries])

    @property
    def zscores(self) -> np.ndarray:
        return np.array([e.z for e in self.entries])

    @property
    def means(self) -> np.ndarray:
        return np.array([e.mean for e in self.entries])

    @property
    def degenerate(self) -> np.ndarray:
        return np.array([e.degenerate_variance for e in self.entries])

    def ranks(self) -> np.ndarray:
        """1 = most important: smallest p-value, then largest mean importance."""
        order = np.lexsort((-self.means, self.pvalues))
        ranks = np.empty(len(order), dtype=int)
        ranks[order] = np.arange(1, len(order) + 1)
        return ranks

    def to_dict(self) -> dict:
        ranks = self.ranks()
        rows = []
        for e, r in zip(self.entries, ranks):
            d = e.to_dict()
            d["rank"] = int(r)
            rows.append(d)
        return {"method": self.method, "variables": rows, "meta": self.meta}


# --------------------------------------------------------------------------
# losses and the Wald statistic


def per_sample_loss(y, yhat, ytilde, task: str = "regression"):
    """Loss increase when ``yhat`` is replaced by ``ytilde``.

    Regression: ``(y - ytilde)^2 - (y - yhat)^2``.  Binary: the predictions
    are logits and the value is the difference in logistic loss, evaluated
    with ``logaddexp`` so that saturated logits stay finite.
    """
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    ytilde = np.asarray(ytilde, dtype=float)
    if task == "regression":
        return (y - ytilde) ** 2 - (y - yhat) ** 2
    if task == "binary":
        # log S(a) = -logaddexp(0, -a);  log(1 - S(a)) = -logaddexp(0, a)
        return (y * (np.logaddexp(0.0, -ytilde) - np.logaddexp(0.0, -yhat))
                + (1.0 - y) * (np.logaddexp(0.0, ytilde) - np.logaddexp(0.0, yhat)))
    raise ValueError(f"unknown task {task!r}")


def upper_normal_tail(z):
    """1 - Phi(z) through erfc, accurate for large z."""
    return 0.5 * erfc(np.asarray(z, dtype=float) / math.sqrt(2.0))


def wald_pvalue(mean: float, sd: float, n_test: int, z_mode: str = "se"):
    """One-sided Wald test of ``mean > 0``.

    Returns ``(z, pvalue, degenerate)``.  ``z_mode="se"`` divides by the
    standard error ``sd / sqrt(n_test)``; ``"literal"`` divides by ``sd``.
    With ``sd == 0`` the test is degenerate: p is 0 for a positive mean and 1
    otherwise.
    """
    if sd < 0 or not math.isfinite(sd):
        raise ValueError(f"sd must be finite and non-negative, got {sd}")
    if z_mode not in Z_MODES:
        raise ValueError(f"z_mode must be one of {Z_MODES}")
    if sd == 0.0:
        if mean > 0:
            return math.inf, 0.0, True
        return (0.0 if mean == 0 else -math.inf), 1.0, True
    scale = sd / math.sqrt(n_test) if z_mode == "se" else sd
    z = mean / scale
    return z, float(upper_normal_tail(z)), False


def summarize_losses(losses, variable: int, method: str, z_mode: str = "se") -> VariableImportance:
    """Mean, standard deviation, z and p from an ``n x B`` loss matrix."""
    L = np.asarray(losses, dtype=float)
    if L.ndim == 1:
        L = L[:, None]
    n, B = L.shape
    if B < 1 or n < 2:
        raise ValueError("need at least 2 rows and 1 column of losses")
    if not np.all(np.isfinite(L)):
        raise FloatingPointError("non-finite per-sample losses")
    row_means = L.mean(axis=1)
    mean = float(row_means.mean())
    sd = float(math.sqrt(np.sum((row_means - mean) ** 2) / (n - 1)))
    z, p, degenerate = wald_pvalue(mean, sd, n, z_mode)
    return VariableImportance(variable=variable, mean=mean, std=sd, z=z, pvalue=p,
                              method=method, degenerate_variance=degenerate)


def perturbation_losses(predict: Callable, X, y, task: str, j: int, columns, yhat=None) -> np.ndarray:
    """``n x B`` losses for ``B`` replacement columns (given as ``B x n``)."""
    X = np.asarray(X, dtype=float)
    columns = np.atleast_2d(np.asarray(columns, dtype=float))
    B, n = columns.shape
    if n != X.shape[0]:
        raise ValueError("replacement columns must have one value per row")
    # the unperturbed rows ride in the same batch so that a learner which
    # ignores column j yields bit-identical predictions
    stacked = np.tile(X, (B + 1, 1))
    stacked[n:, j] = columns.reshape(-1)
    out = np.asarray(predict(stacked)).reshape(B + 1, n)
    if yhat is None:
        yhat = out[0]
    ytilde = out[1:].T
    return per_sample_loss(np.asarray(y, dtype=float)[:, None], np.asarray(yhat)[:, None], ytilde, task)


# --------------------------------------------------------------------------
# evaluation plans: which model scores which rows


def _plans(model, X, y):
    """(model, row indices) pairs covering every evaluation row once."""
    if isinstance(model, CrossfitSplit):
        if X.shape[0] != model.folds.shape[0]:
            raise ValueError("X must contain all cross-fitted rows")
        return [(model.models[k], model.test_rows(k), model.train_rows(k)) for k in (0, 1)]
    return [(model, np.arange(X.shape[0]), None)]


def _prepare(X, y, task):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y row counts differ")
    if task not in ("regression", "binary"):
        raise ValueError(f"unknown task {task!r}")
    return X, y


def _variables(variables, p):
    return list(range(p)) if variables is None else [int(j) for j in variables]


def _check_B(B):
    if B < 1:
        raise ValueError("B must be >= 1")


def cpi_importance(model, X, y, task: str = "regression", B: int = DEFAULT_B, rng=None,
                   construction: str = "additive", depth_grid: Sequence = DEPTH_GRID,
                   forest_config: ForestConfig | None = None, sampler_fit: str = "test",
                   variables=None, z_mode: str = "se", samplers: dict | None = None,
                   permutations: dict | None = None, keep_losses: bool = False) -> ImportanceReport:
    """Conditional permutation importance.

    ``model`` is either a :class:`CrossfitSplit` (``X, y`` = all rows, each
    scored by the model that did not train on it, losses concatenated) or a
    single fitted model (``X, y`` = its test set).

    ``samplers`` maps ``j`` to a pre-fitted :class:`ConditionalSampler` and
    ``permutations`` maps ``j`` to a ``B x n`` array of residual
    permutations; both only apply to the single-model case.
    """
    _check_B(B)
    X, y = _prepare(X, y, task)
    rng = as_generator(rng)
    if sampler_fit not in ("test", "train"):
        raise ValueError("sampler_fit must be 'test' or 'train'")
    plans = _plans(model, X, y)
    if (samplers or permutations) and len(plans) > 1:
        raise ValueError("pinned samplers/permutations need a single model")
    t0 = time.perf_counter()
    entries = []
    losses_out = {}
    sampler_depths = {}
    for j in _variables(variables, X.shape[1]):
        blocks = np.empty((X.shape[0], B))
        depths = []
        for k, (m, rows, train_rows) in enumerate(plans):
            Xk = X[rows]
            if samplers and j in samplers:
                s = samplers[j]
            else:
                X_fit = X[train_rows] if (sampler_fit == "train" and train_rows is not None) else None
                s = fit_conditional(Xk, j, depth_grid, child(rng, "sampler", k, j), construction,
                                    forest_config, X_fit=X_fit)
            depths.append(s.depth)
            if permutations and j in permutations:
                perms = np.asarray(permutations[j])
                cols = np.stack([reconstruct_additive(s, perm=perms[b]) for b in range(B)])
            else:
                draw = child(rng, "perturb", k, j)
                cols = np.stack([s.sample(draw) for _ in range(B)])
            blocks[rows] = perturbation_losses(m.predict_score, Xk, y[rows], task, j, cols)
        entry = summarize_losses(blocks, j, "cpi", z_mode)
        entry.extra = {"sampler_depth": [d if d is not None else -1 for d in depths]}
        sampler_depths[j] = depths
        entries.append(entry)
        if keep_losses:
            losses_out[j] = blocks
    meta = {"B": B, "construction": construction, "z_mode": z_mode, "sampler_fit": sampler_fit,
            "depth_grid": [d if d is not None else -1 for d in depth_grid],
            "seconds": time.perf_counter() - t0}
    return ImportanceReport("cpi", entries, meta, losses_out)


def pi_importance(model, X, y, task: str = "regression", B: int = DEFAULT_B, rng=None,
                  variables=None, z_mode: str = "se", permutations: dict | None = None,
                  keep_losses: bool = False) -> ImportanceReport:
    """Marginal permutation importance (column ``j`` shuffled outright)."""
    _check_B(B)
    X, y = _prepare(X, y, task)
    rng = as_generator(rng)
    plans = _plans(model, X, y)
    if permutations and len(plans) > 1:
        raise ValueError("pinned permutations need a single model")
    t0 = time.perf_counter()
    entries = []
    losses_out = {}
    for j in _variables(variables, X.shape[1]):
        blocks = np.empty((X.shape[0], B))
        for k, (m, rows, _) in enumerate(plans):
            Xk = X[rows]
            if permutations and j in permutations:
                perms = np.asarray(permutations[j])
            else:
                draw = child(rng, "perturb", k, j)
                perms = np.stack([draw.permutation(len(rows)) for _ in range(B)])
            cols = Xk[:, j][perms]
            blocks[rows] = perturbation_losses(m.predict_score, Xk, y[rows], task, j, cols)
        entries.append(summarize_losses(blocks, j, "pi", z_mode))
        if keep_losses:
            losses_out[j] = blocks
    meta = {"B": B, "z_mode": z_mode, "seconds": time.perf_counter() - t0}
    return ImportanceReport("pi", entries, meta, losses_out)


def loco_importance(data: Dataset, crossfit: CrossfitSplit, variables=None, rng=None,
                    refit: Callable | None = None, z_mode: str = "se") -> ImportanceReport:
    """Leave-one-covariate-out: refit without column ``j`` on each fold.

    By default each fold's reduced model reuses the hyperparameters of that
    fold's full model; ``refit(train_data, rng)`` overrides this.
    """
    rng = as_generator(rng)
    X, y = data.X, data.y
    t0 = time.perf_counter()
    entries = []
    for j in _variables(variables, data.p):
        losses = np.empty(data.n)
        for k in (0, 1):
            full = crossfit.models[k]
            train = data.subset(crossfit.train_rows(k)).drop_column(j)
            r = child(rng, "loco", k, j)
            reduced = refit(train, r) if refit is not None else _fit_config(full.config, train, r)
            rows = crossfit.test_rows(k)
            yhat = full.predict_score(X[rows])
            yred = reduced.predict_score(np.delete(X[rows], j, axis=1))
            losses[rows] = per_sample_loss(y[rows], yhat, yred, data.task)
        entries.append(summarize_losses(losses, j, "loco", z_mode))
    return ImportanceReport("loco", entries, {"z_mode": z_mode, "seconds": time.perf_counter() - t0})


def marginal_importance(data: Dataset, variables=None) -> ImportanceReport:
    """Univariate screening, one variable at a time (two-sided p-values).

    Regression: slope t-test of a simple linear regression, importance
    ``|t|``.  Binary: score test of a univariate logistic slope, importance
    ``|z|``.  A constant column gets ``p = 1``.
    """
    X, y = data.X, data.y
    n = data.n
    if n < 3:
        raise ValueError("marginal screening needs at least 3 rows")
    t0 = time.perf_counter()
    entries = []
    yc = y - y.mean()
    for j in _variables(variables, data.p):
        xc = X[:, j] - X[:, j].mean()
        sxx = float(xc @ xc)
        if sxx <= 1e-12 * n * max(1.0, float(np.abs(X[:, j]).max()) ** 2):
            entries.append(VariableImportance(j, 0.0, math.nan, 0.0, 1.0, "marginal", extra={"constant": True}))
            continue
        sxy = float(xc @ yc)
        if data.task == "regression":
            syy = float(yc @ yc)
            if syy == 0.0:
                stat, p = 0.0, 1.0
            else:
                r2 = min(sxy * sxy / (sxx * syy), 1.0)
                if r2 >= 1.0:
                    stat, p = math.copysign(math.inf, sxy), 0.0
                else:
                    stat = math.copysign(math.sqrt(r2 * (n - 2) / (1.0 - r2)), sxy)
                    p = float(2.0 * stats.t.sf(abs(stat), n - 2))
        else:
            ybar = float(y.mean())
            var = ybar * (1.0 - ybar) * sxx
            if var == 0.0:
                stat, p = 0.0, 1.0
            else:
                stat = sxy / math.sqrt(var)
                p = float(2.0 * upper_normal_tail(abs(stat)))
        entries.append(VariableImportance(j, abs(stat), math.nan, stat, p, "marginal"))
    return ImportanceReport("marginal", entries, {"seconds": time.perf_counter() - t0})

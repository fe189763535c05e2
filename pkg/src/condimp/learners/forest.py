"""Random forest of CART trees (variance / Gini splits, sqrt(p) feature draws)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .._rng import as_generator
from . import _cart
from .data import Dataset

# binary forests report frequencies; logits are taken after clipping to
# [PROBA_CLIP, 1 - PROBA_CLIP] so that pure leaves give finite losses
PROBA_CLIP = 1e-3


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 5
    bootstrap: bool = True
    max_features: int | str = "sqrt"

    def features_per_split(self, p: int) -> int:
        if self.max_features == "sqrt":
            return max(1, int(math.floor(math.sqrt(p))))
        if self.max_features in ("all", None):
            return p
        k = int(self.max_features)
        if k < 1:
            raise ValueError("max_features must be positive")
        return min(k, p)


@dataclass
class RandomForestModel:
    """Fitted forest; trees are packed into flat node arrays.

    Tree ``t`` owns nodes ``offsets[t]:offsets[t+1]``; child indices are local
    to the tree.  ``members[member_offsets[t] + start[k] : ... + end[k]]`` are
    the training rows (bootstrap draw, with repeats) that reached node ``k``.
    """

    config: ForestConfig
    task: str
    n_features: int
    offsets: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    start: np.ndarray
    end: np.ndarray
    depth: np.ndarray
    member_offsets: np.ndarray
    members: np.ndarray
    y_train: np.ndarray = field(repr=False)

    @property
    def n_trees(self) -> int:
        return len(self.offsets) - 1

    def tree_slice(self, t: int) -> slice:
        return slice(self.offsets[t], self.offsets[t + 1])

    def predict(self, X, max_depth: int | None = None) -> np.ndarray:
        return predict_forest(self, X, max_depth=max_depth)

    def predict_score(self, X) -> np.ndarray:
        """Regression values, or clipped logits of the class-1 frequency."""
        out = self.predict(X)
        if self.task == "binary":
            eps = PROBA_CLIP
            out = np.clip(out, eps, 1.0 - eps)
            out = np.log(out) - np.log1p(-out)
        return out

    def apply(self, X, max_depth: int | None = None) -> np.ndarray:
        """Global leaf index for every (row, tree), optionally read only to ``max_depth``."""
        X = self._check(X)
        return _cart.apply_forest(X, self.offsets, self.feature, self.threshold, self.left,
                                  self.right, self.depth, _depth_arg(max_depth))

    def leaf_members(self, node: int) -> np.ndarray:
        t = int(np.searchsorted(self.offsets, node, side="right") - 1)
        base = self.member_offsets[t]
        return self.members[base + self.start[node]: base + self.end[node]]

    def max_tree_depth(self) -> int:
        return int(self.depth.max()) if len(self.depth) else 0

    def _check(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got shape {X.shape}")
        return X

    def to_dict(self) -> dict:
        """Debug dump; the layout is not a stable interchange format."""
        trees = []
        for t in range(self.n_trees):
            sl = self.tree_slice(t)
            trees.append({
                "feature": self.feature[sl].tolist(),
                "threshold": self.threshold[sl].tolist(),
                "left": self.left[sl].tolist(),
                "right": self.right[sl].tolist(),
                "value": self.value[sl].tolist(),
            })
        return {"task": self.task, "n_features": self.n_features, "trees": trees}


def _depth_arg(max_depth) -> int:
    if max_depth is None:
        return -1
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0 or None")
    return int(max_depth)


def fit_random_forest(data: Dataset, config: ForestConfig | None = None, rng=None) -> RandomForestModel:
    config = config or ForestConfig()
    rng = as_generator(rng)
    X = np.ascontiguousarray(data.X, dtype=np.float64)
    y = np.ascontiguousarray(data.y, dtype=np.float64)
    n, p = X.shape
    if config.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if config.min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    if n < 2 * config.min_leaf:
        raise ValueError(f"need at least {2 * config.min_leaf} rows for min_leaf={config.min_leaf}, got {n}")
    if config.max_depth is not None and config.max_depth < 0:
        raise ValueError("max_depth must be >= 0 or None")
    max_depth = -1 if config.max_depth is None else int(config.max_depth)
    mtry = config.features_per_split(p)

    parts = []
    for _ in range(config.n_trees):
        if config.bootstrap:
            rows = rng.integers(0, n, size=n)
        else:
            rows = np.arange(n)
        seed = int(rng.integers(0, 2**31 - 1))
        parts.append(_cart.grow_tree(X, y, rows.astype(np.int64), max_depth, config.min_leaf, mtry, seed))

    sizes = [len(part[0]) for part in parts]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    member_sizes = [len(part[8]) for part in parts]
    member_offsets = np.concatenate([[0], np.cumsum(member_sizes)[:-1]]).astype(np.int64)
    cat = [np.concatenate([part[k] for part in parts]) for k in range(9)]
    return RandomForestModel(
        config=config,
        task=data.task,
        n_features=p,
        offsets=offsets,
        feature=cat[0],
        threshold=cat[1],
        left=cat[2],
        right=cat[3],
        value=cat[4],
        start=cat[5],
        end=cat[6],
        depth=cat[7],
        member_offsets=member_offsets,
        members=cat[8],
        y_train=y.copy(),
    )


def predict_forest(model: RandomForestModel, X, max_depth: int | None = None) -> np.ndarray:
    """Mean of per-tree leaf values (class frequency for binary tasks).

    ``max_depth`` reads every tree only down to that depth.  Trees are grown
    breadth-first, so this equals the prediction of a forest grown with that
    depth limit from the same stream; depth tuning relies on it.
    """
    X = model._check(X)
    return _cart.predict_forest(X, model.offsets, model.feature, model.threshold,
                                model.left, model.right, model.value, model.depth,
                                _depth_arg(max_depth))

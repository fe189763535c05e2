"""Base learners: random forest, small MLP, tuning and cross-fitting."""

from .data import Dataset
from .forest import ForestConfig, RandomForestModel, fit_random_forest, predict_forest
from .mlp import DEFAULT_GRID, MlpConfig, MlpModel, fit_mlp
from .selection import (
    CrossfitSplit,
    LearnerSpec,
    make_crossfit,
    prediction_score,
    tune_hyperparams,
    validation_loss,
)

__all__ = [
    "Dataset",
    "ForestConfig",
    "RandomForestModel",
    "fit_random_forest",
    "predict_forest",
    "MlpConfig",
    "MlpModel",
    "DEFAULT_GRID",
    "fit_mlp",
    "CrossfitSplit",
    "LearnerSpec",
    "make_crossfit",
    "prediction_score",
    "tune_hyperparams",
    "validation_loss",
]

"""Conditional permutation importance with cross-fitted learners."""

from .bench import BenchConfig, MethodSpec, aggregate, emit_report, run_bench
from .condsampler import ConditionalSampler, fit_conditional
from .inference import (
    ImportanceReport,
    VariableImportance,
    cpi_importance,
    loco_importance,
    marginal_importance,
    pi_importance,
)
from .learners import Dataset, LearnerSpec, make_crossfit
from .metrics import auc_score, evaluate, power, type1_error
from .simgen import ScenarioSpec, simulate

__version__ = "0.1.0"

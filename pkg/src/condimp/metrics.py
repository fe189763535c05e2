"""Detection metrics and calibration diagnostics for p-values."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc
from scipy.stats import rankdata


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve, ties counted as one half (midranks)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same shape")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    ranks = rankdata(scores, method="average")
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc_score(pvalues, support) -> float:
    """How well ascending p-values rank the informative variables first."""
    return roc_auc(-np.asarray(pvalues, dtype=float), support)


def _split(pvalues, support):
    pvalues = np.asarray(pvalues, dtype=float)
    support = np.asarray(support).astype(bool)
    if pvalues.shape != support.shape:
        raise ValueError("pvalues and support must have the same length")
    return pvalues, support


def type1_error(pvalues, support, alpha: float = 0.05) -> float:
    """Share of null variables with ``p < alpha``."""
    pvalues, support = _split(pvalues, support)
    nulls = pvalues[~support]
    if nulls.size == 0:
        raise ValueError("no null variables")
    return float(np.mean(nulls < alpha))


def power(pvalues, support, alpha: float = 0.05) -> float:
    """Share of informative variables with ``p < alpha``."""
    pvalues, support = _split(pvalues, support)
    signals = pvalues[support]
    if signals.size == 0:
        raise ValueError("no informative variables")
    return float(np.mean(signals < alpha))


def kolmogorov_sf(lam: float, tol: float = 1e-10) -> float:
    """P(K > lam) for the limiting Kolmogorov distribution.

    Uses the alternating series for large ``lam`` and the theta-function
    form for small ``lam``; both are summed until the next term is below
    ``tol``.
    """
    if lam <= 0:
        return 1.0
    if lam < 1.0:
        # 1 - sqrt(2 pi)/lam * sum exp(-(2k-1)^2 pi^2 / (8 lam^2))
        c = math.pi ** 2 / (8.0 * lam * lam)
        total = 0.0
        k = 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * c)
            total += term
            if term < tol:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / lam * total))
    total = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_normality(zscores):
    """One-sample KS distance to N(0, 1) and its asymptotic p-value."""
    z = np.sort(np.asarray(zscores, dtype=float))
    n = z.size
    if n < 20:
        raise ValueError(f"need at least 20 z-scores, got {n}")
    cdf = 0.5 * erfc(-z / math.sqrt(2.0))
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))
    return d, kolmogorov_sf(math.sqrt(n) * d)


def qq_points(pvalues) -> np.ndarray:
    """Rows ``(expected, observed)``: sorted p-values against (i - 0.5)/n."""
    p = np.sort(np.asarray(pvalues, dtype=float))
    n = p.size
    if n == 0:
        raise ValueError("no p-values")
    expected = (np.arange(1, n + 1) - 0.5) / n
    return np.column_stack([expected, p])


def dkw_bound(n: int, level: float = 0.99) -> float:
    """Dvoretzky-Kiefer-Wolfowitz band half-width at confidence ``level``."""
    return math.sqrt(math.log(2.0 / (1.0 - level)) / (2.0 * n))


def binomial_margin(rate: float, trials: int, k: float = 2.0) -> float:
    return k * math.sqrt(rate * (1.0 - rate) / trials)


@dataclass
class EvalResult:
    auc: float | None
    type1_error: float | None
    power: float | None
    runtime_seconds: float
    pvalues: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "type1_error": self.type1_error,
            "power": self.power,
            "runtime_seconds": self.runtime_seconds,
            "pvalues": list(self.pvalues),
        }


def evaluate(pvalues, support, alpha: float = 0.05, runtime_seconds: float = 0.0) -> EvalResult:
    """All metrics that are defined for this support (AUC needs both classes)."""
    pvalues, support = _split(pvalues, support)
    has_null = bool((~support).any())
    has_signal = bool(support.any())
    return EvalResult(
        auc=auc_score(pvalues, support) if has_null and has_signal else None,
        type1_error=type1_error(pvalues, support, alpha) if has_null else None,
        power=power(pvalues, support, alpha) if has_signal else None,
        runtime_seconds=float(runtime_seconds),
        pvalues=[float(p) for p in pvalues],
    )

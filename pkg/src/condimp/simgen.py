"""Synthetic designs and outcomes for the benchmark scenarios.

Designs are Gaussian with an equal-correlation block covariance.  Outcomes
follow one of six generative models (plus ``null``, pure N(0, 1) noise, used
for calibration checks); every draw goes through an explicit
generator so that a ``ScenarioSpec`` (which carries the seed) determines the
data completely.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erfc

from ._rng import as_generator, child, stream

SCENARIOS = (
    "exp1",
    "classification",
    "plain_linear",
    "relu_linear",
    "interactions_only",
    "main_plus_interactions",
    "null",
)
COEF_VALUES = np.array([-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0])
EXP1_SIGNALS = (0, 10, 20, 30, 40)  # x1, x11, x21, x31, x41


def build_block_covariance(p: int, n_blocks: int, rho: float) -> np.ndarray:
    """Unit-diagonal covariance with correlation ``rho`` inside equal blocks.

    >>> build_block_covariance(4, 2, 0.5)
    array([[1. , 0.5, 0. , 0. ],
           [0.5, 1. , 0. , 0. ],
           [0. , 0. , 1. , 0.5],
           [0. , 0. , 0.5, 1. ]])
    """
    if p < 1 or n_blocks < 1:
        raise ValueError("p and n_blocks must be positive")
    if p % n_blocks:
        raise ValueError(f"p={p} is not divisible into {n_blocks} equal blocks")
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    size = p // n_blocks
    block = np.full((size, size), float(rho))
    np.fill_diagonal(block, 1.0)
    return np.kron(np.eye(n_blocks), block)


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str = "exp1"
    n: int = 300
    p: int = 50
    rho: float = 0.0
    snr: float = 4.0
    n_signal: int | None = None
    seed: int = 0
    n_blocks: int = 10

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.n_signal is None:
            default = {"exp1": 5, "null": 0}.get(self.scenario, 20)
            object.__setattr__(self, "n_signal", default)
        if self.scenario == "exp1" and self.n_signal != 5:
            raise ValueError("exp1 has exactly 5 informative variables")
        if self.scenario == "null" and self.n_signal != 0:
            raise ValueError("the null scenario has no informative variables")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not 0 <= self.n_signal <= self.p:
            raise ValueError("n_signal must lie in [0, p]")
        if not self.snr > 0:
            raise ValueError("snr must be positive")
        if self.p % self.n_blocks:
            raise ValueError(f"p={self.p} is not divisible into {self.n_blocks} blocks")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")

    @property
    def task(self) -> str:
        return "binary" if self.scenario == "classification" else "regression"

    @property
    def label(self) -> str:
        return f"{self.scenario}_n{self.n}_p{self.p}_rho{self.rho:g}_snr{self.snr:g}"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GroundTruth:
    support: np.ndarray
    beta_main: np.ndarray
    beta_quad: dict = field(default_factory=dict)

    @property
    def n_signal(self) -> int:
        return int(self.support.sum())

    def to_dict(self) -> dict:
        """JSON form; ``beta_quad`` keys are 1-based ``"k,j"`` column pairs."""
        return {
            "support": [bool(s) for s in self.support],
            "beta_main": [float(b) for b in self.beta_main],
            "beta_quad": {f"{k + 1},{j + 1}": float(v) for (k, j), v in sorted(self.beta_quad.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        quad = {}
        for key, v in d.get("beta_quad", {}).items():
            k, j = (int(t) - 1 for t in key.split(","))
            quad[(k, j)] = float(v)
        return cls(np.array(d["support"], dtype=bool), np.array(d["beta_main"], dtype=float), quad)


def normal_cdf(x):
    """Standard normal CDF through ``erfc`` (accurate in both tails)."""
    return 0.5 * erfc(-np.asarray(x, dtype=float) / np.sqrt(2.0))


def sample_gaussian_design(spec: ScenarioSpec, rng=None) -> np.ndarray:
    """``spec.n`` rows i.i.d. from N(0, Sigma) via a Cholesky factor."""
    rng = stream(spec.seed, "design") if rng is None else as_generator(rng)
    cov = build_block_covariance(spec.p, spec.n_blocks, spec.rho)
    chol = np.linalg.cholesky(cov)
    assert np.all(np.isfinite(chol)), "block covariance must be positive definite"
    Z = rng.standard_normal((spec.n, spec.p))
    return Z @ chol.T


def draw_beta(rng, p: int, n_signal: int) -> np.ndarray:
    """Coefficients from {+-3, +-2, +-1, +-0.5} on the first ``n_signal`` columns."""
    if not 0 <= n_signal <= p:
        raise ValueError("n_signal must lie in [0, p]")
    rng = as_generator(rng)
    beta = np.zeros(p)
    beta[:n_signal] = rng.choice(COEF_VALUES, size=n_signal)
    return beta


def draw_beta_quad(rng, n_signal: int) -> dict:
    rng = as_generator(rng)
    pairs = [(k, j) for k in range(n_signal) for j in range(k + 1, n_signal)]
    values = rng.choice(COEF_VALUES, size=len(pairs))
    return {pair: float(v) for pair, v in zip(pairs, values)}


def quad(X, beta_quad: dict) -> np.ndarray:
    """Sum of ``beta_quad[k, j] * x^k * x^j`` over the stored pairs (0-based)."""
    X = np.asarray(X, dtype=float)
    out = np.zeros(X.shape[0])
    for (k, j), v in beta_quad.items():
        out += v * X[:, k] * X[:, j]
    return out


def noise_scale(signal, snr: float) -> float:
    """sigma = ||signal||_2 / (snr * sqrt(n))."""
    signal = np.asarray(signal, dtype=float)
    return float(np.linalg.norm(signal) / (snr * np.sqrt(signal.shape[0])))


def exp1_signal(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    x1, x11, x21, x31, x41 = (X[:, k] for k in EXP1_SIGNALS)
    return x1 + 2.0 * np.log(1.0 + 2.0 * x11 ** 2 + (x21 + 1.0) ** 2) + x31 * x41


def gen_outcome_exp1(X, rng=None, noise=None):
    """Nonlinear outcome on x1, x11, x21, x31, x41 plus N(0, 1) noise."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if p < 41:
        raise ValueError(f"exp1 uses column 41, so p must be >= 41 (got {p})")
    if noise is None:
        noise = as_generator(rng).standard_normal(n)
    y = exp1_signal(X) + np.asarray(noise, dtype=float)
    support = np.zeros(p, dtype=bool)
    support[list(EXP1_SIGNALS)] = True
    return y, GroundTruth(support=support, beta_main=np.zeros(p))


def gen_outcome_scenario(X, spec: ScenarioSpec, rng=None, beta_main=None, beta_quad=None, noise=None):
    """Outcome for ``spec.scenario`` given a design ``X``.

    Coefficients are drawn from ``rng`` unless given.  ``noise`` pins the
    standard-normal draws (or, for classification, the uniforms compared with
    the probit probabilities).
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if spec.scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {spec.scenario!r}")
    rng = as_generator(rng) if rng is not None else stream(spec.seed, "outcome")
    if spec.scenario == "exp1":
        return gen_outcome_exp1(X, rng, noise)
    if spec.scenario == "null":
        eps = rng.standard_normal(n) if noise is None else np.asarray(noise, dtype=float)
        return eps.copy(), GroundTruth(support=np.zeros(p, dtype=bool), beta_main=np.zeros(p))
    k = spec.n_signal
    if k > p:
        raise ValueError("n_signal exceeds the number of columns")

    uses_main = spec.scenario in ("classification", "plain_linear", "relu_linear", "main_plus_interactions")
    uses_quad = spec.scenario in ("interactions_only", "main_plus_interactions")
    if uses_main and beta_main is None:
        beta_main = draw_beta(rng, p, k)
    if uses_quad and beta_quad is None:
        beta_quad = draw_beta_quad(rng, k)
    beta_main = np.zeros(p) if beta_main is None else np.asarray(beta_main, dtype=float)
    beta_quad = {} if beta_quad is None else dict(beta_quad)

    signal = np.zeros(n)
    if uses_main:
        signal = signal + X @ beta_main
    if uses_quad:
        signal = signal + quad(X, beta_quad)

    if spec.scenario == "classification":
        u = rng.random(n) if noise is None else np.asarray(noise, dtype=float)
        y = (u < normal_cdf(signal)).astype(float)
    else:
        eps = rng.standard_normal(n) if noise is None else np.asarray(noise, dtype=float)
        y = signal + noise_scale(signal, spec.snr) * eps
        if spec.scenario == "relu_linear":
            y = np.maximum(y, 0.0)

    support = np.zeros(p, dtype=bool)
    support[:k] = True
    return y, GroundTruth(support=support, beta_main=beta_main, beta_quad=beta_quad)


def simulate(spec: ScenarioSpec, rng=None):
    """Design, outcome and ground truth for ``spec``.

    Without ``rng`` the streams come from ``spec.seed``; a bench passes a
    per-run generator instead.
    """
    if rng is None:
        design_rng, outcome_rng = stream(spec.seed, "design"), stream(spec.seed, "outcome")
    else:
        rng = as_generator(rng)
        design_rng, outcome_rng = child(rng, "design"), child(rng, "outcome")
    X = sample_gaussian_design(spec, design_rng)
    y, truth = gen_outcome_scenario(X, spec, outcome_rng)
    return X, y, truth


def write_dataset(path, X, y, truth: GroundTruth, spec: ScenarioSpec | None = None) -> tuple[Path, Path]:
    """CSV with columns x1..xp,y plus a JSON sidecar with the ground truth."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    X = np.asarray(X, dtype=float)
    header = ",".join([f"x{k + 1}" for k in range(X.shape[1])] + ["y"])
    np.savetxt(path, np.column_stack([X, y]), delimiter=",", header=header, comments="", fmt="%.17g")
    sidecar = path.with_suffix(".json")
    meta = truth.to_dict()
    meta["spec"] = spec.to_dict() if spec is not None else None
    sidecar.write_text(json.dumps(meta, indent=2))
    return path, sidecar

"""Small fully connected network trained with mini-batch Adam.

Hidden layers use ReLU; the single output unit is linear, so for binary
tasks ``predict`` returns logits and the sigmoid is applied by the loss.
Inputs (and regression targets) are standardised internally; ``predict``
takes raw rows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .._rng import as_generator
from .data import Dataset

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MlpConfig:
    widths: tuple = (32, 32)
    learning_rate: float = 1e-3
    l1: float = 0.0
    l2: float = 0.0
    epochs: int = 200
    batch: int = 64
    patience: int | None = 20
    validation_fraction: float = 0.2
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if any(w < 1 for w in widths):
            raise ValueError(f"hidden widths must be positive, got {widths}")
        object.__setattr__(self, "widths", widths)
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l1 < 0 or self.l2 < 0:
            raise ValueError("regularisation strengths must be non-negative")
        if self.epochs < 1 or self.batch < 1:
            raise ValueError("epochs and batch must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in [0, 1)")


# tuning grid over the three knobs that get tuned: step size, L1, L2
DEFAULT_GRID = tuple(
    MlpConfig(learning_rate=lr, l1=l1, l2=l2)
    for lr in (1e-2, 1e-3)
    for l1 in (0.0, 1e-4)
    for l2 in (0.0, 1e-4)
)


def init_params(sizes, rng) -> list[tuple[np.ndarray, np.ndarray]]:
    params = []
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        gain = 1.0 if k == len(sizes) - 2 else 2.0
        W = rng.normal(0.0, math.sqrt(gain / fan_in), size=(fan_in, fan_out))
        params.append((W, np.zeros(fan_out)))
    return params


def forward(params, X):
    """Output vector plus the hidden activations needed for backprop."""
    acts = [X]
    h = X
    for W, b in params[:-1]:
        h = np.maximum(h @ W + b, 0.0)
        acts.append(h)
    W, b = params[-1]
    return (h @ W + b)[:, 0], acts


def data_loss(out, y, task) -> float:
    if task == "binary":
        return float(np.mean(np.logaddexp(0.0, out) - y * out))
    return float(np.mean((out - y) ** 2))


def penalty(params, l1, l2) -> float:
    total = 0.0
    for W, _ in params:
        if l1:
            total += l1 * np.abs(W).sum()
        if l2:
            total += l2 * np.square(W).sum()
    return float(total)


def loss_and_grads(params, X, y, task, l1=0.0, l2=0.0):
    """Penalised training loss and its gradient for every (W, b)."""
    out, acts = forward(params, X)
    n = X.shape[0]
    if task == "binary":
        loss = np.mean(np.logaddexp(0.0, out) - y * out)
        # d/dz softplus(z) - y z = sigmoid(z) - y
        delta = (0.5 * (1.0 + np.tanh(0.5 * out)) - y) / n
    else:
        resid = out - y
        loss = np.mean(resid ** 2)
        delta = 2.0 * resid / n
    loss = float(loss) + penalty(params, l1, l2)

    grads = [None] * len(params)
    d = delta[:, None]
    for k in range(len(params) - 1, -1, -1):
        W, _ = params[k]
        a = acts[k]
        gW = a.T @ d
        if l1:
            gW = gW + l1 * np.sign(W)
        if l2:
            gW = gW + 2.0 * l2 * W
        grads[k] = (gW, d.sum(axis=0))
        if k:
            d = (d @ W.T) * (a > 0)
    return loss, grads


@dataclass
class MlpModel:
    config: MlpConfig
    task: str
    params: list
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0
    history: list = field(default_factory=list)
    best_epoch: int = 0

    @property
    def n_features(self) -> int:
        return self.x_mean.shape[0]

    def predict(self, X) -> np.ndarray:
        """Regression values, or logits for binary tasks."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got shape {X.shape}")
        out, _ = forward(self.params, (X - self.x_mean) / self.x_scale)
        return out * self.y_scale + self.y_mean

    predict_score = predict

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "widths": list(self.config.widths),
            "params": [[W.tolist(), b.tolist()] for W, b in self.params],
            "x_mean": self.x_mean.tolist(),
            "x_scale": self.x_scale.tolist(),
            "y_mean": self.y_mean,
            "y_scale": self.y_scale,
        }


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        self.v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        out = []
        for k, ((W, b), (gW, gb)) in enumerate(zip(params, grads)):
            mW, mb = self.m[k]
            vW, vb = self.v[k]
            mW = self.b1 * mW + (1 - self.b1) * gW
            mb = self.b1 * mb + (1 - self.b1) * gb
            vW = self.b2 * vW + (1 - self.b2) * gW * gW
            vb = self.b2 * vb + (1 - self.b2) * gb * gb
            self.m[k] = (mW, mb)
            self.v[k] = (vW, vb)
            W = W - self.lr * (mW / c1) / (np.sqrt(vW / c2) + self.eps)
            b = b - self.lr * (mb / c1) / (np.sqrt(vb / c2) + self.eps)
            out.append((W, b))
        return out


class _Sgd:
    def __init__(self, params, lr):
        self.lr = lr

    def step(self, params, grads):
        return [(W - self.lr * gW, b - self.lr * gb) for (W, b), (gW, gb) in zip(params, grads)]


def fit_mlp(data: Dataset, config: MlpConfig | None = None, rng=None) -> MlpModel:
    """Train on ``data``; ``rng`` (if given) replaces ``config.seed``.

    With early stopping enabled a random fifth of the rows (by default) is
    held out and the weights with the lowest held-out loss are kept.
    """
    config = config or MlpConfig()
    rng = as_generator(config.seed if rng is None else rng)
    X = data.X
    y = data.y
    n, p = X.shape

    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale[x_scale == 0] = 1.0
    if data.task == "regression":
        y_mean = float(y.mean())
        y_scale = float(y.std()) or 1.0
    else:
        y_mean, y_scale = 0.0, 1.0
    Z = (X - x_mean) / x_scale
    t = (y - y_mean) / y_scale

    early = config.patience is not None and config.validation_fraction > 0
    order = rng.permutation(n)
    n_val = int(round(config.validation_fraction * n)) if early else 0
    if early and (n_val < 1 or n - n_val < 1):
        early, n_val = False, 0
    val_rows, tr_rows = order[:n_val], order[n_val:]
    Ztr, ttr = Z[tr_rows], t[tr_rows]
    Zval, tval = Z[val_rows], t[val_rows]
    n_tr = len(tr_rows)
    batch = min(config.batch, n_tr)

    params = init_params((p, *config.widths, 1), rng)
    opt = _Adam(params, config.learning_rate) if config.optimizer == "adam" else _Sgd(params, config.learning_rate)

    history = []
    best = (np.inf, params, 0)
    stale = 0
    for epoch in range(config.epochs):
        perm = rng.permutation(n_tr)
        for lo in range(0, n_tr, batch):
            rows = perm[lo:lo + batch]
            loss, grads = loss_and_grads(params, Ztr[rows], ttr[rows], data.task, config.l1, config.l2)
            if not math.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite training loss at epoch {epoch} "
                    f"(lr={config.learning_rate}, l1={config.l1}, l2={config.l2}, widths={config.widths})"
                )
            params = opt.step(params, grads)
        out, _ = forward(params, Ztr)
        train_loss = data_loss(out, ttr, data.task) + penalty(params, config.l1, config.l2)
        if not math.isfinite(train_loss):
            raise FloatingPointError(f"non-finite training loss after epoch {epoch} (lr={config.learning_rate})")
        history.append(train_loss)
        if early:
            val_out, _ = forward(params, Zval)
            val_loss = data_loss(val_out, tval, data.task)
            if val_loss < best[0]:
                best = (val_loss, params, epoch)
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
        else:
            best = (train_loss, params, epoch)

    log.debug("mlp stopped after %d epochs, best epoch %d", len(history), best[2])
    return MlpModel(
        config=config,
        task=data.task,
        params=best[1],
        x_mean=x_mean,
        x_scale=x_scale,
        y_mean=y_mean,
        y_scale=y_scale,
        history=history,
        best_epoch=best[2],
    )


def with_seed(config: MlpConfig, seed: int) -> MlpConfig:
    return replace(config, seed=int(seed))

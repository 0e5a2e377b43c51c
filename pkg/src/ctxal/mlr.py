"""Multinomial logistic classifier with buffered incremental updates.

The classifier supplies per-class posteriors for event instances and is
kept current during a labeling session: newly labeled examples accumulate
in a small buffer and trigger a burst of gradient steps once the buffer
fills, with a decaying step size across bursts.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TEACHER_MODES = ("strong_only", "weak_only", "strong_plus_weak", "all_instances")


@dataclass
class MlrModel:
    theta: np.ndarray                 # (classes, features)
    weight_decay: float = 1e-3        # config key: lambda
    learning_rate: float = 0.1        # config key: alpha
    epochs_per_flush: int = 10
    buffer_capacity: int = 32
    lr_decay: float = 0.9
    buffer_x: list[np.ndarray] = field(default_factory=list)
    buffer_y: list[int] = field(default_factory=list)
    update_rounds: int = 0

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.ndim != 2:
            raise ValueError("theta must be a (classes, features) matrix")
        if self.weight_decay < 0 or self.learning_rate <= 0:
            raise ValueError("weight_decay must be >= 0 and learning_rate > 0")
        if self.buffer_capacity < 1 or self.epochs_per_flush < 1:
            raise ValueError("buffer_capacity and epochs_per_flush must be >= 1")

    @property
    def class_count(self) -> int:
        return self.theta.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.theta.shape[1]


def zero_model(class_count: int, feature_dim: int, **kwargs) -> MlrModel:
    if class_count < 2 or feature_dim < 1:
        raise ValueError("need at least 2 classes and 1 feature")
    return MlrModel(theta=np.zeros((class_count, feature_dim)), **kwargs)


def softmax_rows(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def classify(model: MlrModel, x: np.ndarray) -> np.ndarray:
    """Posterior pmf over classes for a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.feature_dim,):
        raise ValueError(
            f"feature vector has dim {x.shape}, model expects ({model.feature_dim},)")
    return softmax_rows(model.theta @ x)


def classify_batch(model: MlrModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.feature_dim:
        raise ValueError("feature matrix does not match model dimension")
    return softmax_rows(X @ model.theta.T)


def _check_labeled(model: MlrModel, X: np.ndarray, y: np.ndarray):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[1] != model.feature_dim or y.shape != (X.shape[0],):
        raise ValueError("labeled batch shapes do not match the model")
    if X.shape[0] == 0:
        raise ValueError("labeled batch is empty")
    if y.min() < 0 or y.max() >= model.class_count:
        raise ValueError("labels out of class range")
    return X, y


def loss(model: MlrModel, X: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood plus the ridge penalty."""
    X, y = _check_labeled(model, X, y)
    P = classify_batch(model, X)
    nll = -np.log(P[np.arange(X.shape[0]), y]).mean()
    return float(nll + 0.5 * model.weight_decay * np.sum(model.theta ** 2))


def gradient(model: MlrModel, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of :func:`loss` in theta; includes the decay term."""
    X, y = _check_labeled(model, X, y)
    m = X.shape[0]
    P = classify_batch(model, X)
    Y = np.zeros_like(P)
    Y[np.arange(m), y] = 1.0
    return (P - Y).T @ X / m + model.weight_decay * model.theta


def fit(model: MlrModel, X: np.ndarray, y: np.ndarray,
        epochs: int = 300, lr: float | None = None) -> MlrModel:
    """Full-batch gradient descent; used for the initial training phase."""
    X, y = _check_labeled(model, X, y)
    step = model.learning_rate if lr is None else lr
    for _ in range(epochs):
        model.theta -= step * gradient(model, X, y)
    return model


def incremental_update(model: MlrModel, X_new: np.ndarray, y_new: np.ndarray) -> MlrModel:
    """Buffer new labeled examples; run a training burst when full.

    Each burst performs ``epochs_per_flush`` full-buffer gradient steps,
    clears the buffer and decays the step size.  Batches smaller than the
    remaining capacity accumulate without touching the weights.
    """
    X_new, y_new = _check_labeled(model, X_new, y_new)
    for row, lab in zip(X_new, y_new):
        model.buffer_x.append(np.array(row, dtype=float))
        model.buffer_y.append(int(lab))
    if len(model.buffer_x) >= model.buffer_capacity:
        Xb = np.stack(model.buffer_x)
        yb = np.asarray(model.buffer_y, dtype=int)
        for _ in range(model.epochs_per_flush):
            model.theta -= model.learning_rate * gradient(model, Xb, yb)
        model.buffer_x.clear()
        model.buffer_y.clear()
        model.learning_rate *= model.lr_decay
        model.update_rounds += 1
    return model


def weak_teacher(node_marginals: dict[str, np.ndarray], delta: float,
                 exclude: set[str] | frozenset[str] = frozenset()) -> dict[str, int]:
    """Self-labels for nodes whose belief passes the confidence gate.

    A node receives its argmax label only when the maximum marginal is
    strictly greater than ``delta``; nodes in ``exclude`` (e.g. already
    manually labeled) never qualify.
    """
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta must lie in (0, 1]")
    out: dict[str, int] = {}
    for node_id, pmf in node_marginals.items():
        if node_id in exclude:
            continue
        pmf = np.asarray(pmf, dtype=float)
        top = int(np.argmax(pmf))
        if float(pmf[top]) > delta:
            out[node_id] = top
    return out


@dataclass(frozen=True)
class TeacherConfig:
    """Labeling budget and teacher composition for one session."""

    delta: float = 0.9
    k_absolute: int | None = None
    k_fraction: float | None = None
    mode: str = "strong_plus_weak"

    def __post_init__(self) -> None:
        if not (0.0 < self.delta <= 1.0):
            raise ValueError("delta must lie in (0, 1]")
        if self.mode not in TEACHER_MODES:
            raise ValueError(f"mode must be one of {TEACHER_MODES}")
        if self.k_absolute is not None and self.k_absolute < 1:
            raise ValueError("absolute budget must be >= 1")
        if self.k_fraction is not None and not (0.0 < self.k_fraction <= 1.0):
            raise ValueError("fractional budget must lie in (0, 1]")

    @property
    def uses_strong(self) -> bool:
        return self.mode in ("strong_only", "strong_plus_weak", "all_instances")

    @property
    def uses_weak(self) -> bool:
        return self.mode in ("weak_only", "strong_plus_weak")

    def batch_budget(self, pool_size: int) -> int:
        """Manual-label budget for a batch of ``pool_size`` candidates."""
        if pool_size <= 0:
            return 0
        if self.mode == "all_instances":
            return pool_size
        if self.mode == "weak_only":
            return 0
        if self.k_absolute is not None:
            return min(self.k_absolute, pool_size)
        frac = 0.25 if self.k_fraction is None else self.k_fraction
        return int(np.clip(round(frac * pool_size), 1, pool_size))

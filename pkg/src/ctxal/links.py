"""Pairwise relatedness prediction from spatio-temporal gaps.

Two event instances are candidates for a graph edge when a linear score
of their temporal and spatial separation is non-negative.  The score
weights are learned from labeled pairs with a max-margin objective.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FIT_EPOCHS = 200
L2_PENALTY = 1e-3


@dataclass(frozen=True)
class LinkPredictor:
    """Linear relatedness score over [1, |dt|, ||ds||]."""

    w: np.ndarray
    trained_on: int = 0

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=float)
        if w.shape != (3,) or not np.all(np.isfinite(w)):
            raise ValueError("link predictor weights must be a finite 3-vector")
        object.__setattr__(self, "w", w)


def gap_vector(inst_i, inst_j) -> np.ndarray:
    """Augmented gap features [1, |dt|, ||ds||] for one instance pair."""
    dt = abs(float(inst_i.temporal_pos) - float(inst_j.temporal_pos))
    ds = float(np.linalg.norm(np.asarray(inst_i.spatial_pos, dtype=float)
                              - np.asarray(inst_j.spatial_pos, dtype=float)))
    return np.array([1.0, dt, ds])


def link_score(pred: LinkPredictor, dt: float, ds: float) -> float:
    # keep the same association order as the vectorized mask path
    return float(pred.w[0] + pred.w[1] * dt + pred.w[2] * ds)


def predict_link(pred: LinkPredictor, inst_i, inst_j) -> bool:
    """True when the pair scores as related (score >= 0)."""
    d = gap_vector(inst_i, inst_j)
    return link_score(pred, d[1], d[2]) >= 0.0


def link_mask(pred: LinkPredictor, times: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Boolean relatedness mask over all instance pairs; diagonal is False."""
    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float)
    dt = np.abs(times[:, None] - times[None, :])
    diff = positions[:, None, :] - positions[None, :, :]
    ds = np.sqrt((diff ** 2).sum(axis=2))
    score = pred.w[0] + pred.w[1] * dt + pred.w[2] * ds
    mask = score >= 0.0
    np.fill_diagonal(mask, False)
    return mask


def _objective(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    margins = y * (X @ w)
    hinge = np.maximum(0.0, 1.0 - margins).mean()
    return float(hinge + 0.5 * L2_PENALTY * np.dot(w[1:], w[1:]))


def fit_links(gaps: np.ndarray, related: np.ndarray) -> LinkPredictor:
    """Fit the relatedness score by hinge-loss subgradient descent.

    ``gaps`` is an (n, 2) array of [|dt|, ||ds||] pairs and ``related``
    the matching boolean targets.  The gap columns are standardized
    internally and the standardization is folded back into the returned
    raw-space weights, so retraining after a common positive rescaling
    of both features leaves predictions unchanged.  The best iterate by
    penalized objective is returned, which also guarantees the training
    hinge loss never exceeds that of the zero vector.
    """
    D = np.asarray(gaps, dtype=float)
    rel = np.asarray(related)
    if D.ndim != 2 or D.shape[1] != 2:
        raise ValueError("gaps must be an (n, 2) array of [|dt|, ||ds||]")
    if rel.shape != (D.shape[0],) or D.shape[0] == 0:
        raise ValueError("related must be a non-empty vector matching gaps")
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise ValueError("gap features must be finite and non-negative")
    y = np.where(rel.astype(bool), 1.0, -1.0)
    n = y.size

    mu = D.mean(axis=0)
    sd = D.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    X = np.column_stack([np.ones(n), (D - mu) / sd])

    w = np.zeros(3)
    best_w = w.copy()
    best_obj = _objective(X, y, w)
    for t in range(FIT_EPOCHS):
        margins = y * (X @ w)
        viol = margins < 1.0
        grad = -(y[viol, None] * X[viol]).sum(axis=0) / n
        grad[1:] += L2_PENALTY * w[1:]
        w = w - (1.0 / (1.0 + 0.05 * t)) * grad
        obj = _objective(X, y, w)
        if obj < best_obj - 1e-15:
            best_obj = obj
            best_w = w.copy()

    raw = np.array([
        best_w[0] - float(np.sum(best_w[1:] * mu / sd)),
        best_w[1] / sd[0],
        best_w[2] / sd[1],
    ])
    return LinkPredictor(w=raw, trained_on=n)

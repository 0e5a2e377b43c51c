"""Context model: co-occurrence counts, gap statistics and binning.

Everything the graph builder needs beyond the classifier lives here:
class/class and class/attribute co-occurrence tables, running Gaussian
statistics of the spatial, temporal and scalar-attribute gaps, the
binning scheme for scalar attributes, and the link predictor.  All
statistics update incrementally as labels arrive.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .links import LinkPredictor

if TYPE_CHECKING:  # pragma: no cover
    from .graph import ActivityInstance

VARIANCE_FLOOR = 1e-6
DEFAULT_BIN_COUNT = 8


class BinRangeWarning(UserWarning):
    """A scalar attribute fell outside the configured bin range."""


@dataclass(frozen=True)
class GaussianParam:
    mean: float
    variance: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.mean) or not np.isfinite(self.variance):
            raise ValueError("Gaussian parameters must be finite")
        if self.variance <= 0:
            raise ValueError("variance must be positive")


def gaussian_density(x, param: GaussianParam):
    """Univariate normal density, vectorized over ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-((x - param.mean) ** 2) / (2.0 * param.variance))
    out = out / np.sqrt(2.0 * np.pi * param.variance)
    return float(out) if out.ndim == 0 else out


@dataclass
class RunningGaussian:
    """Welford-style running mean/variance (population convention)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def update(self, x: float) -> None:
        x = float(x)
        if not np.isfinite(x):
            raise ValueError("sample must be finite")
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def update_many(self, xs) -> None:
        for x in np.asarray(xs, dtype=float).ravel():
            self.update(x)

    @property
    def variance(self) -> float:
        if self.count < 2:
            return 1.0
        return max(self.m2 / self.count, VARIANCE_FLOOR)

    def param(self) -> GaussianParam:
        return GaussianParam(mean=self.mean, variance=self.variance)


@dataclass
class CooccurrenceMatrix:
    """Count table over (row category, column category) pairs."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.ndim != 2 or np.any(self.counts < 0):
            raise ValueError("counts must be a non-negative matrix")

    @classmethod
    def smoothed(cls, rows: int, cols: int) -> "CooccurrenceMatrix":
        # Laplace +1 so every pairing keeps strictly positive potential mass
        return cls(counts=np.ones((rows, cols)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape


@dataclass(frozen=True)
class BinningScheme:
    """Ascending bin edges for scalar attributes; values are clipped."""

    edges: np.ndarray

    def __post_init__(self) -> None:
        edges = np.asarray(self.edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly ascending with >= 2 entries")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_range(cls, lo: float, hi: float, bins: int = DEFAULT_BIN_COUNT) -> "BinningScheme":
        if not (hi > lo) or bins < 1:
            raise ValueError("need hi > lo and bins >= 1")
        return cls(edges=np.linspace(lo, hi, bins + 1))

    @property
    def bin_count(self) -> int:
        return self.edges.size - 1

    def assign(self, value: float) -> tuple[int, bool]:
        """Bin index for ``value`` plus a flag marking out-of-range clips."""
        value = float(value)
        clipped = value < self.edges[0] or value > self.edges[-1]
        idx = int(np.searchsorted(self.edges, value, side="right")) - 1
        idx = min(max(idx, 0), self.bin_count - 1)
        return idx, clipped


@dataclass
class ContextModel:
    """All context statistics for one labeling session."""

    class_count: int
    cooccur_activity: CooccurrenceMatrix
    cooccur: dict[str, CooccurrenceMatrix] = field(default_factory=dict)
    temporal_gap: RunningGaussian = field(default_factory=RunningGaussian)
    spatial_gap: RunningGaussian = field(default_factory=RunningGaussian)
    context_offset: dict[str, RunningGaussian] = field(default_factory=dict)
    value_stats: dict[str, RunningGaussian] = field(default_factory=dict)
    class_value_stats: dict[str, list[RunningGaussian]] = field(default_factory=dict)
    binning: dict[str, BinningScheme] = field(default_factory=dict)
    link_predictor: LinkPredictor | None = None

    def __post_init__(self) -> None:
        if self.class_count < 2:
            raise ValueError("need at least two classes")
        if self.cooccur_activity.shape != (self.class_count, self.class_count):
            raise ValueError("activity co-occurrence must be class_count square")

    def attribute_dim(self, key: str) -> int:
        if key in self.cooccur:
            return self.cooccur[key].shape[1]
        if key in self.binning:
            return self.binning[key].bin_count
        raise KeyError(f"unknown attribute kind {key!r}")


def new_context_model(class_count: int,
                      pmf_kinds: dict[str, int] | None = None,
                      scalar_kinds: dict[str, BinningScheme] | None = None,
                      link_predictor: LinkPredictor | None = None) -> ContextModel:
    """Fresh model with Laplace-smoothed counts and empty gap statistics."""
    pmf_kinds = dict(pmf_kinds or {})
    scalar_kinds = dict(scalar_kinds or {})
    model = ContextModel(
        class_count=class_count,
        cooccur_activity=CooccurrenceMatrix.smoothed(class_count, class_count),
        link_predictor=link_predictor,
    )
    for key, dim in pmf_kinds.items():
        if dim < 1:
            raise ValueError(f"attribute kind {key!r} needs >= 1 categories")
        model.cooccur[key] = CooccurrenceMatrix.smoothed(class_count, dim)
        model.context_offset[key] = RunningGaussian()
    for key, scheme in scalar_kinds.items():
        model.binning[key] = scheme
        model.value_stats[key] = RunningGaussian()
        model.class_value_stats[key] = [RunningGaussian() for _ in range(class_count)]
    return model


def update_context(context: ContextModel, labels: np.ndarray,
                   adjacency: np.ndarray, instances) -> ContextModel:
    """Accumulate co-occurrence counts and gap statistics from one batch.

    ``labels`` holds the post-inference class of every batch instance and
    ``adjacency`` the symmetric activity-link pattern over the batch.  The
    activity table counts every ordered adjacent pair, so it stays
    symmetric; attribute tables pair each instance's label with the modal
    category of its observations.  Gap Gaussians absorb squared temporal
    and spatial separations of linked pairs.
    """
    labels = np.asarray(labels, dtype=int)
    adjacency = np.asarray(adjacency)
    n = labels.size
    if adjacency.shape != (n, n):
        raise ValueError("adjacency must be square and match labels")
    if len(instances) != n:
        raise ValueError("instances must match labels")
    if n and (labels.min() < 0 or labels.max() >= context.class_count):
        raise ValueError("labels out of class range")
    if not np.array_equal(adjacency, adjacency.T):
        raise ValueError("adjacency must be symmetric")

    adj = adjacency.astype(bool)
    iu, iv = np.nonzero(adj)
    np.add.at(context.cooccur_activity.counts, (labels[iu], labels[iv]), 1.0)

    upper = iu < iv
    for u, v in zip(iu[upper], iv[upper]):
        a, b = instances[u], instances[v]
        dt2 = (float(a.temporal_pos) - float(b.temporal_pos)) ** 2
        ds2 = float(np.sum((np.asarray(a.spatial_pos, dtype=float)
                            - np.asarray(b.spatial_pos, dtype=float)) ** 2))
        context.temporal_gap.update(dt2)
        context.spatial_gap.update(ds2)

    for u, inst in enumerate(instances):
        lab = int(labels[u])
        for obs in inst.context_obs:
            key = obs.key
            if obs.prior_pmf is not None:
                if key not in context.cooccur:
                    raise KeyError(f"attribute kind {key!r} not configured")
                cat = int(np.argmax(obs.prior_pmf))
                context.cooccur[key].counts[lab, cat] += 1.0
                off2 = float(np.sum((np.asarray(inst.spatial_pos, dtype=float)
                                     - np.asarray(obs.spatial_pos, dtype=float)) ** 2))
                context.context_offset[key].update(off2)
            else:
                if key not in context.value_stats:
                    raise KeyError(f"attribute kind {key!r} not configured")
                context.value_stats[key].update(float(obs.scalar_value))
                context.class_value_stats[key][lab].update(float(obs.scalar_value))
    return context

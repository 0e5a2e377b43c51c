"""Potential construction for graph nodes and edges.

Node potentials come from the classifier posterior (instances) or the
detector evidence (observations).  Edge potentials combine co-occurrence
counts with Gaussian densities evaluated on squared spatial/temporal
separations.  All tables are clamped to a small positive floor so that
log-domain inference never sees a zero.
"""
from __future__ import annotations

import warnings
from typing import TYPE_CHECKING

import numpy as np

from .context import BinRangeWarning, ContextModel, gaussian_density
from .mlr import MlrModel, classify

if TYPE_CHECKING:  # pragma: no cover
    from .graph import ActivityInstance, ContextObservation

EPS = 1e-12


def _clamp(table: np.ndarray) -> np.ndarray:
    return np.maximum(table, EPS)


def activity_node_potential(instance, classifier: MlrModel) -> np.ndarray:
    """Classifier posterior for one instance; sums to 1."""
    return classify(classifier, instance.features)


def context_node_potential(obs, context: ContextModel) -> np.ndarray:
    """Evidence vector for a single observation.

    Categorical kinds pass the detector pmf through unchanged.  Scalar
    kinds produce a one-hot bin indicator scaled by the global Gaussian
    density of the measured value; out-of-range values clip to the
    boundary bin with a warning.
    """
    if obs.prior_pmf is not None:
        return np.array(obs.prior_pmf, dtype=float)
    key = obs.key
    if key not in context.binning:
        raise KeyError(f"no binning configured for attribute kind {key!r}")
    scheme = context.binning[key]
    idx, clipped = scheme.assign(obs.scalar_value)
    if clipped:
        warnings.warn(
            f"scalar value {obs.scalar_value!r} outside bin range for {key!r}",
            BinRangeWarning, stacklevel=2)
    vec = np.zeros(scheme.bin_count)
    vec[idx] = gaussian_density(obs.scalar_value, context.value_stats[key].param())
    return vec


def concat_context_potentials(vectors) -> np.ndarray:
    """Stack per-kind evidence vectors into one combined vector."""
    vectors = [np.asarray(v, dtype=float) for v in vectors]
    if not vectors:
        raise ValueError("nothing to concatenate")
    return np.concatenate(vectors)


def activity_activity_potential(inst_i, inst_j, context: ContextModel) -> np.ndarray:
    """Pair table: co-occurrence counts scaled by the two gap densities.

    The Gaussian factors are evaluated on the squared temporal and
    squared spatial separation of the pair.
    """
    dt2 = (float(inst_i.temporal_pos) - float(inst_j.temporal_pos)) ** 2
    ds2 = float(np.sum((inst_i.spatial_pos - inst_j.spatial_pos) ** 2))
    g_t = gaussian_density(dt2, context.temporal_gap.param())
    g_s = gaussian_density(ds2, context.spatial_gap.param())
    return _clamp(context.cooccur_activity.counts * g_t * g_s)


def activity_context_potential(inst, obs, context: ContextModel) -> np.ndarray:
    """Attachment table between an instance and one of its observations.

    Categorical kinds: the class/category co-occurrence table scaled by
    the Gaussian density of the squared instance-to-observation offset.
    Scalar kinds: one column (the active bin) carries the per-class
    Gaussian density of the value, so rows whose class matches the value
    dominate.
    """
    key = obs.key
    if obs.prior_pmf is not None:
        if key not in context.cooccur:
            raise KeyError(f"attribute kind {key!r} not configured")
        ds2 = float(np.sum((inst.spatial_pos - obs.spatial_pos) ** 2))
        g = gaussian_density(ds2, context.context_offset[key].param())
        return _clamp(context.cooccur[key].counts * g)
    if key not in context.binning:
        raise KeyError(f"no binning configured for attribute kind {key!r}")
    scheme = context.binning[key]
    idx, _ = scheme.assign(obs.scalar_value)
    q = context.class_count
    table = np.zeros((q, scheme.bin_count))
    for cls in range(q):
        dens = gaussian_density(obs.scalar_value,
                                context.class_value_stats[key][cls].param())
        table[cls, idx] = dens
    return _clamp(table)


def concat_context_tables(tables) -> np.ndarray:
    """Stack per-kind attachment tables side by side (shared class axis)."""
    tables = [np.asarray(t, dtype=float) for t in tables]
    if not tables:
        raise ValueError("nothing to concatenate")
    rows = {t.shape[0] for t in tables}
    if len(rows) != 1:
        raise ValueError("tables must share the class axis")
    return np.hstack(tables)

"""Save and restore the learned state of a session.

One ``.npz`` archive holds the classifier (weights, step schedule and
pending buffer) and the full context model (count tables, gap statistics,
binning schemes and the link predictor).  Round-trips are exact: every
float is stored as-is, so a restored session continues bit-for-bit.
"""
from __future__ import annotations

import numpy as np

from .context import (
    BinningScheme,
    ContextModel,
    CooccurrenceMatrix,
    RunningGaussian,
    new_context_model,
)
from .links import LinkPredictor
from .mlr import MlrModel

FORMAT_VERSION = 1


def _pack_running(g: RunningGaussian) -> np.ndarray:
    return np.array([float(g.count), g.mean, g.m2])


def _unpack_running(arr: np.ndarray) -> RunningGaussian:
    return RunningGaussian(count=int(arr[0]), mean=float(arr[1]), m2=float(arr[2]))


def save_state(path, classifier: MlrModel, context: ContextModel) -> None:
    data: dict[str, np.ndarray] = {
        "version": np.array([FORMAT_VERSION]),
        "classifier/theta": classifier.theta,
        "classifier/scalars": np.array([
            classifier.weight_decay,
            classifier.learning_rate,
            float(classifier.epochs_per_flush),
            float(classifier.buffer_capacity),
            classifier.lr_decay,
            float(classifier.update_rounds),
        ]),
        "classifier/buffer_y": np.asarray(classifier.buffer_y, dtype=int),
        "context/class_count": np.array([context.class_count]),
        "context/cooccur_activity": context.cooccur_activity.counts,
        "context/temporal_gap": _pack_running(context.temporal_gap),
        "context/spatial_gap": _pack_running(context.spatial_gap),
    }
    if classifier.buffer_x:
        data["classifier/buffer_x"] = np.stack(classifier.buffer_x)
    else:
        data["classifier/buffer_x"] = np.zeros((0, classifier.feature_dim))

    for key, table in context.cooccur.items():
        data[f"context/cooccur/{key}"] = table.counts
        data[f"context/offset/{key}"] = _pack_running(context.context_offset[key])
    for key, scheme in context.binning.items():
        data[f"context/binning/{key}"] = scheme.edges
        data[f"context/values/{key}"] = _pack_running(context.value_stats[key])
        data[f"context/class_values/{key}"] = np.stack(
            [_pack_running(g) for g in context.class_value_stats[key]])
    if context.link_predictor is not None:
        data["links/w"] = context.link_predictor.w

    with open(path, "wb") as fh:
        np.savez(fh, **data)


def load_state(path) -> tuple[MlrModel, ContextModel]:
    with np.load(path) as archive:
        data = {key: archive[key] for key in archive.files}

    version = int(data["version"][0])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")

    scalars = data["classifier/scalars"]
    classifier = MlrModel(
        theta=data["classifier/theta"],
        weight_decay=float(scalars[0]),
        learning_rate=float(scalars[1]),
        epochs_per_flush=int(scalars[2]),
        buffer_capacity=int(scalars[3]),
        lr_decay=float(scalars[4]),
        buffer_x=[row.copy() for row in data["classifier/buffer_x"]],
        buffer_y=[int(v) for v in data["classifier/buffer_y"]],
        update_rounds=int(scalars[5]),
    )

    link = LinkPredictor(w=data["links/w"]) if "links/w" in data else None
    pmf_kinds = {}
    scalar_kinds = {}
    for key in data:
        if key.startswith("context/cooccur/"):
            kind = key.split("/", 2)[2]
            pmf_kinds[kind] = data[key].shape[1]
        elif key.startswith("context/binning/"):
            kind = key.split("/", 2)[2]
            scalar_kinds[kind] = BinningScheme(edges=data[key])

    context = new_context_model(
        int(data["context/class_count"][0]),
        pmf_kinds=pmf_kinds,
        scalar_kinds=scalar_kinds,
        link_predictor=link)
    context.cooccur_activity = CooccurrenceMatrix(
        counts=data["context/cooccur_activity"])
    context.temporal_gap = _unpack_running(data["context/temporal_gap"])
    context.spatial_gap = _unpack_running(data["context/spatial_gap"])
    for kind in pmf_kinds:
        context.cooccur[kind] = CooccurrenceMatrix(
            counts=data[f"context/cooccur/{kind}"])
        context.context_offset[kind] = _unpack_running(data[f"context/offset/{kind}"])
    for kind in scalar_kinds:
        context.value_stats[kind] = _unpack_running(data[f"context/values/{kind}"])
        context.class_value_stats[kind] = [
            _unpack_running(row) for row in data[f"context/class_values/{kind}"]]
    return classifier, context

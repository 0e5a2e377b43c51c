"""Dataset files and run configuration.

Datasets are JSONL: a meta line followed by one record per instance.
Configuration is a flat ``key = value`` file; every key is documented in
``CONFIG_KEYS`` and unknown keys are rejected loudly rather than
silently ignored.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..graph import ActivityInstance, ContextObservation
from .synth import EventDataset

SCHEMA_VERSION = 1

# key -> (type tag, default shown in help, description)
CONFIG_KEYS: dict[str, tuple[str, str, str]] = {
    "n": ("int", "2000", "training instances to generate"),
    "test_n": ("int", "500", "held-out instances to generate"),
    "seed": ("int", "0", "seed for generation and the session loop"),
    "context_strength": ("float", "0.9", "detector confidence in the true group"),
    "feature_noise": ("float", "1.4", "feature noise sigma around class prototypes"),
    "feature_dim": ("int", "16", "feature vector dimensionality"),
    "object_rate": ("float", "0.85", "probability an instance carries an object detection"),
    "person_rate": ("float", "0.6", "probability an instance carries a person measurement"),
    "person_noise": ("float", "0.6", "noise sigma on person measurements"),
    "run_min": ("int", "5", "shortest visit length in instances"),
    "run_max": ("int", "9", "longest visit length in instances"),
    "batch": ("int", "50", "window size processed per labeling round"),
    "k": ("float", "0.25", "fraction of each window sent to the strong teacher"),
    "K": ("int", "", "absolute per-window strong budget (overrides k)"),
    "delta": ("float", "0.9", "confidence gate for self-labels"),
    "lambda": ("float", "1e-3", "classifier ridge penalty"),
    "alpha": ("float", "0.1", "classifier learning rate"),
    "buffer": ("int", "32", "classifier update buffer capacity"),
    "flush_epochs": ("int", "10", "gradient steps per buffer flush"),
    "init_fraction": ("float", "0.1", "stream prefix labeled during bootstrap"),
    "init_epochs": ("int", "300", "gradient steps for the bootstrap fit"),
    "damping": ("float", "0.5", "message damping for loopy graphs"),
    "bp_tol": ("float", "1e-6", "message convergence tolerance"),
    "bp_iters": ("int", "100", "message passing iteration budget"),
    "mode": ("str", "strong_only", "teacher composition per round"),
    "strategy": ("str", "caqs", "query selection strategy"),
    "eval_every": ("int", "0", "rounds between test evaluations (0 = final only)"),
    "bins": ("int", "8", "bin count for scalar attributes"),
}


def parse_config(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in out:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        if not value:
            raise ValueError(f"config line {lineno}: empty value for {key!r}")
        out[key] = value
    return out


def load_config(path) -> dict[str, str]:
    return parse_config(Path(path).read_text())


def config_int(cfg: dict[str, str], key: str, default: int) -> int:
    try:
        return int(cfg.get(key, default))
    except ValueError as exc:
        raise ValueError(f"config key {key!r}: expected integer, got {cfg[key]!r}") from exc


def config_float(cfg: dict[str, str], key: str, default: float) -> float:
    try:
        return float(cfg.get(key, default))
    except ValueError as exc:
        raise ValueError(f"config key {key!r}: expected number, got {cfg[key]!r}") from exc


def _obs_to_record(obs: ContextObservation) -> dict:
    if obs.prior_pmf is not None:
        rec = {"kind": obs.kind, "pmf": obs.prior_pmf.tolist(),
               "pos": obs.spatial_pos.tolist()}
        if obs.kind == "custom":
            rec["index"] = obs.index
        return rec
    return {"kind": obs.kind, "value": obs.scalar_value}


def _obs_from_record(rec: dict, lineno: int) -> ContextObservation:
    kind = rec.get("kind")
    try:
        if "pmf" in rec:
            return ContextObservation(
                kind=kind, prior_pmf=np.asarray(rec["pmf"], dtype=float),
                spatial_pos=np.asarray(rec["pos"], dtype=float),
                index=int(rec.get("index", 0)))
        return ContextObservation(kind=kind, scalar_value=float(rec["value"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"line {lineno}: bad observation record: {exc}") from exc


def save_dataset(path, dataset: EventDataset) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        meta = {"type": "meta", "version": SCHEMA_VERSION,
                "class_count": dataset.class_count,
                "feature_dim": dataset.feature_dim,
                "count": len(dataset.instances)}
        fh.write(json.dumps(meta) + "\n")
        for inst in dataset.instances:
            rec = {
                "type": "instance",
                "id": inst.id,
                "t": inst.temporal_pos,
                "pos": inst.spatial_pos.tolist(),
                "features": inst.features.tolist(),
                "label": inst.true_label,
                "seq": dataset.seqs[inst.id],
                "obs": [_obs_to_record(o) for o in inst.context_obs],
            }
            fh.write(json.dumps(rec) + "\n")


def load_dataset(path) -> EventDataset:
    instances: list[ActivityInstance] = []
    seqs: dict[str, int] = {}
    meta: dict | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {lineno}: invalid JSON: {exc}") from exc
            kind = rec.get("type")
            if kind == "meta":
                if meta is not None:
                    raise ValueError(f"line {lineno}: duplicate meta record")
                if rec.get("version") != SCHEMA_VERSION:
                    raise ValueError(
                        f"line {lineno}: unsupported schema version {rec.get('version')!r}")
                meta = rec
            elif kind == "instance":
                if meta is None:
                    raise ValueError(f"line {lineno}: instance before meta record")
                try:
                    inst = ActivityInstance(
                        id=rec["id"],
                        features=np.asarray(rec["features"], dtype=float),
                        spatial_pos=np.asarray(rec["pos"], dtype=float),
                        temporal_pos=float(rec["t"]),
                        context_obs=tuple(_obs_from_record(o, lineno)
                                          for o in rec.get("obs", [])),
                        true_label=rec.get("label"),
                    )
                except (KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"line {lineno}: bad instance record: {exc}") from exc
                if inst.features.size != meta["feature_dim"]:
                    raise ValueError(
                        f"line {lineno}: feature dim {inst.features.size} != "
                        f"meta {meta['feature_dim']}")
                if inst.id in seqs:
                    raise ValueError(f"line {lineno}: duplicate id {inst.id!r}")
                if inst.true_label is not None and not (
                        0 <= inst.true_label < meta["class_count"]):
                    raise ValueError(
                        f"line {lineno}: label {inst.true_label} outside "
                        f"[0, {meta['class_count']})")
                instances.append(inst)
                seqs[inst.id] = int(rec.get("seq", -1))
            else:
                raise ValueError(f"line {lineno}: unknown record type {kind!r}")
    if meta is None:
        raise ValueError("dataset has no meta record")
    if len(instances) != meta.get("count", len(instances)):
        raise ValueError(
            f"meta declares {meta['count']} instances, file has {len(instances)}")
    return EventDataset(instances=tuple(instances), seqs=seqs,
                        class_count=int(meta["class_count"]),
                        feature_dim=int(meta["feature_dim"]))

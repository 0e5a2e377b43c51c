"""Synthetic event streams with planted context structure.

The stream is a sequence of visits (runs).  Each run draws one of four
co-occurrence groups and mixes that group's "hard" class with filler
classes, each of which spans two adjacent groups.  Hard classes come
in feature-twin pairs that share a prototype, so features alone cannot
tell them apart; the object detections and within-run co-occurrence
reveal the group and with it the twin identity.  Fillers are
feature-separable but mutually confusable at the default noise, and
their two-group affinity means context narrows them without naming
them.  Good label placement pays on both halves, which keeps the
benefit of context modeling and of query selection measurable instead
of cosmetic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..graph import ActivityInstance, ContextObservation

GROUPS = 4
# group g pins hard class g; each filler class spans two groups, chosen so
# the groups of a twin pair never share a filler: the feature-separable
# fillers a run contains then also distinguish the run's twin identity
HARD_OF_GROUP = (0, 1, 2, 3)
FILLER_CLASSES = (4, 5, 6, 7)
FILLERS_OF_GROUP = ((4, 5), (6, 7), (4, 7), (5, 6))


@dataclass(frozen=True)
class GeneratorConfig:
    class_count: int = 8
    feature_dim: int = 16
    instance_count: int = 2000
    context_strength: float = 0.9    # detector confidence in the true group
    feature_noise: float = 1.4
    object_rate: float = 0.85
    person_rate: float = 0.6
    person_noise: float = 0.6
    run_length: tuple[int, int] = (5, 9)
    within_gap: tuple[float, float] = (1.0, 4.0)
    across_gap: float = 120.0
    arena: float = 100.0
    jitter: float = 3.0
    hard_ratio: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.class_count != 8:
            raise ValueError("the planted design uses exactly 8 classes")
        if not (0.0 <= self.context_strength <= 1.0):
            raise ValueError("context_strength must lie in [0, 1]")
        if self.instance_count < 1 or self.feature_dim < 2:
            raise ValueError("need instances and at least 2 feature dims")
        if not (0.0 <= self.hard_ratio <= 1.0):
            raise ValueError("hard_ratio must lie in [0, 1]")


@dataclass(frozen=True)
class EventDataset:
    """Instances plus the run metadata the link predictor trains on."""

    instances: tuple[ActivityInstance, ...]
    seqs: dict[str, int]
    class_count: int
    feature_dim: int

    def __post_init__(self) -> None:
        missing = [i.id for i in self.instances if i.id not in self.seqs]
        if missing:
            raise ValueError(f"instances without run metadata: {missing[:3]}")

    def __len__(self) -> int:
        return len(self.instances)

    def labels(self) -> dict[str, int]:
        return {i.id: int(i.true_label) for i in self.instances
                if i.true_label is not None}


def class_prototypes(rng: np.random.Generator, feature_dim: int,
                     scale: float = 3.0) -> np.ndarray:
    """Eight prototypes where classes (0,1) and (2,3) are exact twins."""
    protos = rng.normal(size=(8, feature_dim))
    protos = protos / np.linalg.norm(protos, axis=1, keepdims=True) * scale
    protos[1] = protos[0]
    protos[3] = protos[2]
    return protos


PERSON_MEANS = np.linspace(0.8, 9.2, 8)
PERSON_RANGE = (0.0, 10.0)


def generate_dataset(config: GeneratorConfig, start_id: int = 0,
                     proto_seed: int | None = None) -> EventDataset:
    # prototypes come from their own stream so a train/test pair can share
    # class geometry while drawing disjoint event streams
    rng = np.random.default_rng(config.seed)
    proto_rng = np.random.default_rng(
        config.seed if proto_seed is None else proto_seed)
    protos = class_prototypes(proto_rng, config.feature_dim)

    instances: list[ActivityInstance] = []
    seqs: dict[str, int] = {}
    t = 0.0
    run = 0
    counter = start_id
    lo, hi = config.run_length
    while len(instances) < config.instance_count:
        length = int(rng.integers(lo, hi + 1))
        length = min(length, config.instance_count - len(instances))
        group = int(rng.integers(0, GROUPS))
        center = rng.uniform(0.0, config.arena, size=2)
        t += config.across_gap
        for _ in range(length):
            t += float(rng.uniform(*config.within_gap))
            label = HARD_OF_GROUP[group] if rng.random() < config.hard_ratio \
                else int(rng.choice(FILLERS_OF_GROUP[group]))
            feats = protos[label] + rng.normal(0.0, config.feature_noise,
                                               size=config.feature_dim)
            pos = center + rng.normal(0.0, config.jitter, size=2)

            obs: list[ContextObservation] = []
            if rng.random() < config.object_rate:
                s = config.context_strength
                pmf = np.full(GROUPS, (1.0 - s) / GROUPS)
                pmf[group] += s
                obs.append(ContextObservation(
                    kind="object", prior_pmf=pmf,
                    spatial_pos=pos + rng.normal(0.0, 1.0, size=2)))
            if rng.random() < config.person_rate:
                value = PERSON_MEANS[label] + rng.normal(0.0, config.person_noise)
                value = float(np.clip(value, *PERSON_RANGE))
                obs.append(ContextObservation(kind="person", scalar_value=value))

            inst_id = f"ev{counter:06d}"
            counter += 1
            instances.append(ActivityInstance(
                id=inst_id, features=feats, spatial_pos=pos,
                temporal_pos=t, context_obs=tuple(obs), true_label=label))
            seqs[inst_id] = run
        run += 1

    return EventDataset(instances=tuple(instances), seqs=seqs,
                        class_count=config.class_count,
                        feature_dim=config.feature_dim)


def train_test_pair(config: GeneratorConfig,
                    test_count: int) -> tuple[EventDataset, EventDataset]:
    """Train stream plus a disjoint test stream from a shifted seed."""
    train = generate_dataset(config)
    test_cfg = GeneratorConfig(**{
        **_as_kwargs(config),
        "instance_count": test_count,
        "seed": config.seed + 1_000_003,
    })
    test = generate_dataset(test_cfg, start_id=1_000_000,
                            proto_seed=config.seed)
    return train, test


def _as_kwargs(config: GeneratorConfig) -> dict:
    return {name: getattr(config, name) for name in config.__dataclass_fields__}

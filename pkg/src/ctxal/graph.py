"""Graph data model: event instances, context observations, CRF graphs.

A graph has one node per event instance (states = activity classes) and
one leaf node per context observation, with pairwise potentials on
instance/instance links and instance/observation attachments.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import potentials
from .context import ContextModel
from .links import link_mask
from .mlr import MlrModel, classify_batch

PMF_KINDS = ("object", "custom")
SCALAR_KINDS = ("person",)
KNOWN_KINDS = PMF_KINDS + SCALAR_KINDS

EDGE_ACTIVITY = "activity-activity"
EDGE_CONTEXT = "activity-context"


@dataclass(frozen=True)
class ContextObservation:
    """One detected attribute attached to a single event instance.

    Categorical kinds ("object" and indexed "custom" kinds) carry a
    detector pmf plus a position; the scalar "person" kind carries a
    raw measurement that is binned later.
    """

    kind: str
    prior_pmf: np.ndarray | None = None
    scalar_value: float | None = None
    spatial_pos: np.ndarray | None = None
    index: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KNOWN_KINDS:
            raise ValueError(f"unknown attribute kind {self.kind!r}")
        if self.index < 0 or (self.kind != "custom" and self.index != 0):
            raise ValueError("index is only meaningful for custom kinds")
        has_pmf = self.prior_pmf is not None
        has_val = self.scalar_value is not None
        if has_pmf == has_val:
            raise ValueError("exactly one of prior_pmf / scalar_value is required")
        if self.kind in PMF_KINDS:
            if not has_pmf:
                raise ValueError(f"kind {self.kind!r} requires prior_pmf")
            pmf = np.asarray(self.prior_pmf, dtype=float)
            if pmf.ndim != 1 or pmf.size < 1 or np.any(pmf < 0) or not np.all(np.isfinite(pmf)):
                raise ValueError("prior_pmf must be a non-negative vector")
            if abs(float(pmf.sum()) - 1.0) > 1e-9:
                raise ValueError("prior_pmf must sum to 1 within 1e-9")
            if self.spatial_pos is None:
                raise ValueError("categorical observations need a spatial position")
            pos = np.asarray(self.spatial_pos, dtype=float)
            if pos.shape != (2,) or not np.all(np.isfinite(pos)):
                raise ValueError("spatial_pos must be a finite 2-vector")
            object.__setattr__(self, "prior_pmf", pmf)
            object.__setattr__(self, "spatial_pos", pos)
        else:
            if not has_val or not np.isfinite(float(self.scalar_value)):
                raise ValueError(f"kind {self.kind!r} requires a finite scalar_value")
            object.__setattr__(self, "scalar_value", float(self.scalar_value))
            if self.spatial_pos is not None:
                pos = np.asarray(self.spatial_pos, dtype=float)
                if pos.shape != (2,) or not np.all(np.isfinite(pos)):
                    raise ValueError("spatial_pos must be a finite 2-vector")
                object.__setattr__(self, "spatial_pos", pos)

    @property
    def key(self) -> str:
        """Attribute-kind key used by the context model tables."""
        return self.kind if self.kind != "custom" else f"custom{self.index}"


@dataclass(frozen=True)
class ActivityInstance:
    """One event instance in the stream."""

    id: str
    features: np.ndarray
    spatial_pos: np.ndarray
    temporal_pos: float
    context_obs: tuple[ContextObservation, ...] = ()
    true_label: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("id must be a non-empty string")
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 1 or feats.size < 1 or not np.all(np.isfinite(feats)):
            raise ValueError("features must be a finite vector")
        pos = np.asarray(self.spatial_pos, dtype=float)
        if pos.shape != (2,) or not np.all(np.isfinite(pos)):
            raise ValueError("spatial_pos must be a finite 2-vector")
        t = float(self.temporal_pos)
        if not np.isfinite(t):
            raise ValueError("temporal_pos must be finite")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "spatial_pos", pos)
        object.__setattr__(self, "temporal_pos", t)
        object.__setattr__(self, "context_obs", tuple(self.context_obs))
        if self.true_label is not None and self.true_label < 0:
            raise ValueError("true_label must be a class index")


@dataclass(frozen=True)
class PotentialTable:
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValueError("potential table must be strictly positive and finite")
        object.__setattr__(self, "values", vals)

    @property
    def dims(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class ActivityNode:
    id: str
    prior: np.ndarray
    instance: ActivityInstance
    observed_label: int | None = None


@dataclass(frozen=True)
class ContextNode:
    id: str
    pmf: np.ndarray
    owner: str
    obs: ContextObservation


@dataclass(frozen=True)
class EdgeRecord:
    endpoints: tuple[str, str]
    kind: str
    table: PotentialTable


@dataclass(frozen=True)
class CrfGraph:
    class_count: int
    activity_nodes: tuple[ActivityNode, ...]
    context_nodes: tuple[ContextNode, ...]
    edges: tuple[EdgeRecord, ...]

    @property
    def activity_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.activity_nodes)

    def activity_index(self) -> dict[str, int]:
        return {n.id: i for i, n in enumerate(self.activity_nodes)}

    def adjacency(self) -> np.ndarray:
        """Symmetric boolean activity-link matrix in node order."""
        idx = self.activity_index()
        n = len(self.activity_nodes)
        adj = np.zeros((n, n), dtype=bool)
        for edge in self.edges:
            if edge.kind == EDGE_ACTIVITY:
                i, j = idx[edge.endpoints[0]], idx[edge.endpoints[1]]
                adj[i, j] = adj[j, i] = True
        return adj


def build_graph(instances, classifier: MlrModel, context: ContextModel) -> CrfGraph:
    """Assemble the CRF for one batch of instances.

    Nodes are ordered by instance id; instance/instance edges are exactly
    the pairs the link predictor scores non-negative; every observation
    becomes a leaf node attached to its instance.
    """
    instances = list(instances)
    if not instances:
        raise ValueError("cannot build a graph from zero instances")
    ids = [inst.id for inst in instances]
    if len(set(ids)) != len(ids):
        raise ValueError("instance ids must be unique")
    if context.class_count != classifier.class_count:
        raise ValueError("classifier and context disagree on class count")
    if context.link_predictor is None:
        raise ValueError("context model has no trained link predictor")

    order = sorted(range(len(instances)), key=lambda i: instances[i].id)
    instances = [instances[i] for i in order]

    feats = np.stack([inst.features for inst in instances])
    priors = classify_batch(classifier, feats)

    activity_nodes = tuple(
        ActivityNode(id=inst.id, prior=priors[i], instance=inst)
        for i, inst in enumerate(instances))

    times = np.array([inst.temporal_pos for inst in instances])
    positions = np.stack([inst.spatial_pos for inst in instances])
    mask = link_mask(context.link_predictor, times, positions)

    edges: list[EdgeRecord] = []
    n = len(instances)
    for i in range(n):
        for j in range(i + 1, n):
            if mask[i, j]:
                table = potentials.activity_activity_potential(
                    instances[i], instances[j], context)
                edges.append(EdgeRecord(
                    endpoints=(instances[i].id, instances[j].id),
                    kind=EDGE_ACTIVITY,
                    table=PotentialTable(values=table)))

    context_nodes: list[ContextNode] = []
    for inst in instances:
        for k, obs in enumerate(inst.context_obs):
            node_id = f"{inst.id}::c{k}"
            raw = potentials.context_node_potential(obs, context)
            raw = np.maximum(raw, potentials.EPS)
            pmf = raw / raw.sum()
            table = potentials.activity_context_potential(inst, obs, context)
            context_nodes.append(ContextNode(id=node_id, pmf=pmf, owner=inst.id, obs=obs))
            edges.append(EdgeRecord(
                endpoints=(inst.id, node_id),
                kind=EDGE_CONTEXT,
                table=PotentialTable(values=table)))

    return CrfGraph(
        class_count=classifier.class_count,
        activity_nodes=activity_nodes,
        context_nodes=tuple(context_nodes),
        edges=tuple(edges))


def condition(graph: CrfGraph, labels: dict[str, int]) -> CrfGraph:
    """Return a copy of the graph with the given nodes clamped.

    The input graph is never mutated; conditioning twice on the same
    labels equals conditioning once.
    """
    known = {n.id for n in graph.activity_nodes}
    for node_id, lab in labels.items():
        if node_id not in known:
            raise KeyError(f"unknown activity node {node_id!r}")
        if not (0 <= int(lab) < graph.class_count):
            raise ValueError(f"label {lab!r} out of range for {node_id!r}")
    new_nodes = tuple(
        replace(node, observed_label=int(labels[node.id])) if node.id in labels else node
        for node in graph.activity_nodes)
    return replace(graph, activity_nodes=new_nodes)

"""Entropy and mutual-information summaries of an inferred graph.

These reduce a marginal set to the quantities the batch selector needs:
per-node entropies h and a sparse symmetric matrix M of pairwise mutual
information on linked instances.  All quantities are in nats.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import EDGE_ACTIVITY, CrfGraph
from .inference import MarginalSet


def node_entropy(pmf: np.ndarray) -> float:
    """Shannon entropy of a pmf in nats; zero-mass states contribute 0."""
    p = np.asarray(pmf, dtype=float)
    if p.ndim != 1 or p.size < 1 or np.any(p < 0):
        raise ValueError("pmf must be a non-negative vector")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def edge_mutual_information(joint: np.ndarray) -> float:
    """Mutual information of a joint table against its own margins.

    The table is normalized defensively; the result is clamped at zero
    so tiny negative round-off never leaks into the selector.
    """
    J = np.asarray(joint, dtype=float)
    if J.ndim != 2 or np.any(J < 0):
        raise ValueError("joint must be a non-negative matrix")
    total = J.sum()
    if total <= 0:
        raise ValueError("joint table has no mass")
    P = J / total
    pa = P.sum(axis=1)
    pb = P.sum(axis=0)
    mask = P > 0
    outer = pa[:, None] * pb[None, :]
    mi = float((P[mask] * (np.log(P[mask]) - np.log(outer[mask]))).sum())
    return max(mi, 0.0)


@dataclass(frozen=True)
class QueryProblem:
    """Inputs to batch selection over one graph's instance nodes."""

    h: np.ndarray
    M: np.ndarray
    K: int
    ids: tuple[str, ...]
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=float)
        M = np.asarray(self.M, dtype=float)
        n = h.size
        if M.shape != (n, n):
            raise ValueError("M must be square and match h")
        if len(self.ids) != n:
            raise ValueError("ids must match h")
        if not np.allclose(M, M.T, atol=0.0):
            raise ValueError("M must be symmetric")
        if np.any(np.diag(M) != 0.0):
            raise ValueError("M must have a zero diagonal")
        if np.any(h < 0) or np.any(M < 0):
            raise ValueError("entropies and mutual information must be non-negative")
        if not (1 <= self.K <= n):
            raise ValueError("K must lie in [1, N]")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "M", M)

    @property
    def size(self) -> int:
        return self.h.size

    def index_of(self, node_id: str) -> int:
        return self.ids.index(node_id)


def build_query_problem(graph: CrfGraph, marginals: MarginalSet, K: int) -> QueryProblem:
    """Collect h and M from the marginals of one inferred graph.

    A clamped node has zero entropy and, after conditioning, zero mutual
    information on every incident link, so it never attracts budget.
    K is clipped to the pool size (with a note) but must be >= 1.
    """
    ids = graph.activity_ids
    n = len(ids)
    if K < 1:
        raise ValueError("K must be >= 1")
    notes: list[str] = []
    if K > n:
        notes.append(f"K reduced from {K} to pool size {n}")
        K = n

    h = np.zeros(n)
    for i, node_id in enumerate(ids):
        if node_id not in marginals.node_marginals:
            raise KeyError(f"marginals missing node {node_id!r}")
        h[i] = node_entropy(marginals.node_marginals[node_id])

    index = {node_id: i for i, node_id in enumerate(ids)}
    M = np.zeros((n, n))
    for edge in graph.edges:
        if edge.kind != EDGE_ACTIVITY:
            continue
        if edge.endpoints not in marginals.edge_marginals:
            raise KeyError(f"marginals missing edge {edge.endpoints!r}")
        mi = edge_mutual_information(marginals.edge_marginals[edge.endpoints])
        i, j = index[edge.endpoints[0]], index[edge.endpoints[1]]
        M[i, j] = M[j, i] = mi
        cap = min(h[i], h[j]) + 1e-9
        if mi > cap:
            notes.append(
                f"MI {mi:.3e} on {edge.endpoints} exceeds min incident entropy")

    return QueryProblem(h=h, M=M, K=K, ids=ids, notes=tuple(notes))


def approx_joint_entropy(problem: QueryProblem) -> float:
    """Entropy sum minus pairwise MI over links (each link counted once)."""
    return float(problem.h.sum() - 0.5 * problem.M.sum())

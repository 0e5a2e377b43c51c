"""Log-domain sum-product inference with a synchronous schedule.

Messages run over the instance/instance subgraph; observation leaves are
absorbed into their owner's effective potential up front (a leaf's
message never changes, so this is exact and keeps every message the same
length).  Leaf marginals and attachment-edge marginals are recovered
afterwards.  The schedule is deterministic: the same graph and options
produce bitwise-identical marginals.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import EDGE_ACTIVITY, EDGE_CONTEXT, CrfGraph

LOG_ZERO = -1e30


def logsumexp(a: np.ndarray, axis: int | None = None, keepdims: bool = False):
    """Shift-by-max log-sum-exp; local because the scipy version's
    per-call dispatch overhead dominates on the small arrays BP uses."""
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    if keepdims:
        return out
    if axis is None:
        return out.item()
    return np.squeeze(out, axis=axis)


@dataclass(frozen=True)
class BpOptions:
    max_iters: int = 100
    tol: float = 1e-6
    damping: float = 0.5

    def __post_init__(self) -> None:
        if self.max_iters < 1 or self.tol <= 0 or not (0.0 <= self.damping < 1.0):
            raise ValueError("invalid inference options")


@dataclass(frozen=True)
class MarginalSet:
    node_marginals: dict[str, np.ndarray]
    edge_marginals: dict[tuple[str, str], np.ndarray]
    converged: bool
    iterations: int
    max_residual: float


def _log_clamped(pmf: np.ndarray, label: int | None) -> np.ndarray:
    if label is None:
        return np.log(np.maximum(pmf, 1e-300))
    out = np.full(pmf.shape, LOG_ZERO)
    out[label] = 0.0
    return out


def infer(graph: CrfGraph, opts: BpOptions = BpOptions()) -> MarginalSet:
    """Run sum-product on the graph and return all marginals.

    Clamped nodes emit exactly one-hot beliefs.  Non-convergence within
    the iteration budget is reported through the ``converged`` flag, not
    raised.  Exact on trees once messages settle.
    """
    q = graph.class_count
    idx = graph.activity_index()
    n = len(graph.activity_nodes)

    log_phi = np.stack([
        _log_clamped(node.prior, node.observed_label)
        for node in graph.activity_nodes])

    # absorb observation leaves: their message to the owner is constant
    leaf_msg: dict[str, np.ndarray] = {}
    ctx_pmf: dict[str, np.ndarray] = {}
    ctx_table: dict[str, np.ndarray] = {}
    ctx_by_id = {c.id: c for c in graph.context_nodes}
    for edge in graph.edges:
        if edge.kind != EDGE_CONTEXT:
            continue
        owner, cid = edge.endpoints
        cnode = ctx_by_id[cid]
        log_psi = np.log(edge.table.values)
        log_pmf = np.log(cnode.pmf)
        msg = logsumexp(log_psi + log_pmf[None, :], axis=1)
        msg = msg - logsumexp(msg)
        leaf_msg[cid] = msg
        ctx_pmf[cid] = log_pmf
        ctx_table[cid] = log_psi
        log_phi[idx[owner]] = log_phi[idx[owner]] + msg

    aa_edges = [e for e in graph.edges if e.kind == EDGE_ACTIVITY]
    n_edges = len(aa_edges)

    if n_edges == 0:
        incoming = np.zeros((n, q))
        messages = np.zeros((0, q))
        src = dst = np.zeros(0, dtype=int)
        log_psi_dir = np.zeros((0, q, q))
        converged, iterations, residual = True, 0, 0.0
    else:
        src = np.empty(2 * n_edges, dtype=int)
        dst = np.empty(2 * n_edges, dtype=int)
        log_psi_dir = np.empty((2 * n_edges, q, q))
        for j, edge in enumerate(aa_edges):
            u, v = idx[edge.endpoints[0]], idx[edge.endpoints[1]]
            table = np.log(edge.table.values)
            src[2 * j], dst[2 * j] = u, v
            log_psi_dir[2 * j] = table
            src[2 * j + 1], dst[2 * j + 1] = v, u
            log_psi_dir[2 * j + 1] = table.T
        rev = np.arange(2 * n_edges) ^ 1

        messages = np.full((2 * n_edges, q), -np.log(q))
        converged = False
        residual = np.inf
        iterations = 0
        for it in range(opts.max_iters):
            incoming = np.zeros((n, q))
            np.add.at(incoming, dst, messages)
            belief_wo = log_phi[src] + incoming[src] - messages[rev]
            raw = logsumexp(log_psi_dir + belief_wo[:, :, None], axis=1)
            raw = raw - logsumexp(raw, axis=1, keepdims=True)
            new = opts.damping * messages + (1.0 - opts.damping) * raw
            residual = float(np.max(np.abs(new - messages))) if new.size else 0.0
            messages = new
            iterations = it + 1
            if residual < opts.tol:
                converged = True
                break
        incoming = np.zeros((n, q))
        np.add.at(incoming, dst, messages)

    log_belief = log_phi + incoming
    log_belief = log_belief - logsumexp(log_belief, axis=1, keepdims=True)
    beliefs = np.exp(log_belief)
    beliefs = beliefs / beliefs.sum(axis=1, keepdims=True)

    node_marginals: dict[str, np.ndarray] = {
        node.id: beliefs[i] for i, node in enumerate(graph.activity_nodes)}
    edge_marginals: dict[tuple[str, str], np.ndarray] = {}

    if n_edges:
        belief_wo = log_phi[src] + incoming[src] - messages[rev]
        for j, edge in enumerate(aa_edges):
            table = log_psi_dir[2 * j] + belief_wo[2 * j][:, None] + belief_wo[2 * j + 1][None, :]
            table = np.exp(table - logsumexp(table))
            edge_marginals[edge.endpoints] = table / table.sum()

    for edge in graph.edges:
        if edge.kind != EDGE_CONTEXT:
            continue
        owner, cid = edge.endpoints
        owner_wo = log_belief[idx[owner]] - leaf_msg[cid]
        table = ctx_table[cid] + owner_wo[:, None] + ctx_pmf[cid][None, :]
        table = np.exp(table - logsumexp(table))
        table = table / table.sum()
        edge_marginals[edge.endpoints] = table
        node_marginals[cid] = table.sum(axis=0)

    return MarginalSet(
        node_marginals=node_marginals,
        edge_marginals=edge_marginals,
        converged=converged,
        iterations=iterations,
        max_residual=float(residual))


def predict_labels(marginals: MarginalSet,
                   ids: tuple[str, ...] | None = None) -> dict[str, int]:
    """Argmax label per node; ties resolve to the lowest class index.

    Pass ``ids`` (usually the graph's activity ids) to keep observation
    leaves, whose states are categories rather than classes, out of the
    result.
    """
    keys = marginals.node_marginals.keys() if ids is None else ids
    return {node_id: int(np.argmax(marginals.node_marginals[node_id]))
            for node_id in keys}

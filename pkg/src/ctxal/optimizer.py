"""Exact batch selection via a convexified binary quadratic program.

Selecting the K jointly most informative instances maximizes
``u'h - u'M1 + 0.5 u'Mu`` over binary u with sum K.  In minimization
form the Hessian ``Q = -M`` is indefinite whenever M has an edge, so a
diagonal shift ``gamma I`` (gamma = the largest absolute row sum of M)
makes it positive semidefinite while adding the same constant
``gamma K / 2`` at every feasible binary point.  Branch and bound over
the box relaxation then certifies a global optimum: each node solves a
convex QP over the budgeted box by projected gradient, polished to a
KKT point so bounds are tight enough for exact pruning.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .infometrics import QueryProblem

INT_TOL = 1e-9
PRUNE_TOL = 1e-12
FALLBACK_SLACK = 1e-6  # bound slack when the KKT polish does not verify


class InfeasibleFixing(Exception):
    """The fixed coordinates cannot be completed to a feasible point."""


@dataclass(frozen=True)
class BqpInstance:
    Q: np.ndarray
    f: np.ndarray
    K: int
    gamma: float = 0.0

    def __post_init__(self) -> None:
        Q = np.asarray(self.Q, dtype=float)
        f = np.asarray(self.f, dtype=float)
        n = f.size
        if Q.shape != (n, n) or not (1 <= self.K <= n):
            raise ValueError("inconsistent instance dimensions")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "f", f)

    @property
    def size(self) -> int:
        return self.f.size


@dataclass(frozen=True)
class Selection:
    chosen: tuple[int, ...]
    objective_value: float
    bb_nodes_explored: int
    certified_optimal: bool


def from_problem(problem: QueryProblem) -> BqpInstance:
    """Minimization form of the selection objective: Q = -M, f = M1 - h."""
    M = problem.M
    return BqpInstance(Q=-M, f=M.sum(axis=1) - problem.h, K=problem.K, gamma=0.0)


def objective(u: np.ndarray, problem: QueryProblem) -> float:
    """Original (un-shifted) minimization objective at u."""
    u = np.asarray(u, dtype=float)
    M = problem.M
    return float(-0.5 * u @ M @ u + u @ (M.sum(axis=1) - problem.h))


def objective_of_set(problem: QueryProblem, subset) -> float:
    """Same objective evaluated directly on an index set."""
    S = np.fromiter(subset, dtype=int)
    gain = float(problem.h[S].sum()
                 - problem.M[S].sum()
                 + 0.5 * problem.M[np.ix_(S, S)].sum())
    return -gain


def bqp_value(u: np.ndarray, inst: BqpInstance) -> float:
    u = np.asarray(u, dtype=float)
    return float(0.5 * u @ inst.Q @ u + u @ inst.f)


def convexify(inst: BqpInstance) -> BqpInstance:
    """Shift the Hessian into the PSD cone by its worst row mass.

    gamma is the largest absolute row sum of M = -Q, which dominates the
    spectral radius, so Q + gamma I is diagonally dominant and PSD.  On
    feasible binary points the objective shifts by the constant
    gamma K / 2, leaving the argmin unchanged.  M = 0 keeps gamma = 0.
    """
    gamma = float(np.abs(inst.Q).sum(axis=1).max()) if inst.size else 0.0
    if gamma == 0.0:
        return BqpInstance(Q=inst.Q, f=inst.f, K=inst.K, gamma=0.0)
    return BqpInstance(Q=inst.Q + gamma * np.eye(inst.size), f=inst.f,
                       K=inst.K, gamma=gamma)


def project_capped_simplex(v: np.ndarray, budget: float) -> np.ndarray:
    """Euclidean projection onto {0 <= u <= 1, sum u = budget}.

    Exact breakpoint search on the monotone function
    ``g(tau) = sum clip(v - tau, 0, 1)``; entries landing on a bound come
    out exactly 0 or 1.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    if budget < -1e-12 or budget > n + 1e-12:
        raise ValueError("budget outside [0, n]")
    if n == 0:
        return v.copy()
    if budget <= 0:
        return np.zeros(n)
    if budget >= n:
        return np.ones(n)
    bps = np.unique(np.concatenate([v - 1.0, v]))
    gs = np.clip(v[None, :] - bps[:, None], 0.0, 1.0).sum(axis=1)
    # gs descends as bps ascend; locate the last breakpoint with g >= budget
    k = int(np.searchsorted(-gs, -budget, side="right")) - 1
    k = min(max(k, 0), bps.size - 2)
    if gs[k] == budget:
        tau = bps[k]
    else:
        mid = 0.5 * (bps[k] + bps[k + 1])
        active = int(np.count_nonzero((v - 1.0 < mid) & (mid < v)))
        if active == 0:
            tau = bps[k]
        else:
            tau = bps[k] + (gs[k] - budget) / active
    return np.clip(v - tau, 0.0, 1.0)


@dataclass(frozen=True)
class RelaxationResult:
    value: float
    u: np.ndarray
    exact: bool


_PRIMAL_TOL = 1e-11
_DUAL_TOL = 1e-11


def _bordered_solve(A: np.ndarray, c: np.ndarray, at_hi: np.ndarray,
                    free: np.ndarray, k_rem: int):
    """Equality-KKT solve on the free block; None when it is degenerate."""
    n_free = int(free.sum())
    Aff = A[np.ix_(free, free)]
    rhs_vec = -(c[free] + A[np.ix_(free, at_hi)].sum(axis=1))
    kkt = np.zeros((n_free + 1, n_free + 1))
    kkt[:n_free, :n_free] = Aff
    kkt[:n_free, n_free] = 1.0
    kkt[n_free, :n_free] = 1.0
    rhs = np.concatenate([rhs_vec, [float(k_rem)]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    if not np.all(np.isfinite(sol)) or np.max(np.abs(kkt @ sol - rhs)) > 1e-9:
        return None
    return sol[:n_free], float(sol[n_free])


def _pdas(A: np.ndarray, c: np.ndarray, budget: int, z0: np.ndarray,
          max_rounds: int = 60):
    """Primal-dual active-set solve of the budgeted box QP.

    Starting from the bound pattern of ``z0``, each round solves the
    equality KKT system on the current free block and then migrates
    primal violators onto their bound and dual violators off it.  On a
    fixed point, primal and dual feasibility hold to near machine
    precision, so the returned value is an exact bound.  Returns
    ``(z, value)`` or None when the iteration cycles or degenerates.
    """
    m = z0.size
    at_lo = z0 <= _PRIMAL_TOL
    at_hi = z0 >= 1.0 - _PRIMAL_TOL
    at_lo &= ~at_hi
    seen: set[bytes] = set()
    for _ in range(max_rounds):
        key = at_lo.tobytes() + at_hi.tobytes()
        if key in seen:
            return None
        seen.add(key)
        free = ~(at_lo | at_hi)
        n_free = int(free.sum())
        k_rem = budget - int(at_hi.sum())

        if n_free == 0:
            z = at_hi.astype(float)
            g = A @ z + c
            if k_rem != 0:
                # wrong cardinality: release the most promising bound coords
                if k_rem > 0:
                    order = np.argsort(g + np.where(at_lo, 0.0, np.inf))
                    at_lo[order[:k_rem]] = False
                else:
                    order = np.argsort(-g + np.where(at_hi, 0.0, np.inf))
                    at_hi[order[:-k_rem]] = False
                continue
            nu_min = float((-g[at_lo]).max()) if at_lo.any() else -np.inf
            nu_max = float((-g[at_hi]).min()) if at_hi.any() else np.inf
            if nu_min <= nu_max + _DUAL_TOL:
                return z, float(0.5 * z @ A @ z + c @ z)
            nu = 0.5 * (nu_min + nu_max)
            rel_lo = at_lo & (g + nu < -_DUAL_TOL)
            rel_hi = at_hi & (g + nu > _DUAL_TOL)
            at_lo &= ~rel_lo
            at_hi &= ~rel_hi
            continue

        if k_rem < 0:
            flip = np.flatnonzero(at_hi)[:(-k_rem)]
            at_hi[flip] = False
            continue
        if k_rem > n_free:
            flip = np.flatnonzero(at_lo)[:(k_rem - n_free)]
            at_lo[flip] = False
            continue

        sol = _bordered_solve(A, c, at_hi, free, k_rem)
        if sol is None:
            return None
        z_free, nu = sol
        z = np.where(at_hi, 1.0, 0.0)
        z[free] = z_free
        g = A @ z + c

        prim_lo = free.copy()
        prim_lo[free] = z_free < -_PRIMAL_TOL
        prim_hi = free.copy()
        prim_hi[free] = z_free > 1.0 + _PRIMAL_TOL
        dual_lo = at_lo & (g + nu < -_DUAL_TOL)
        dual_hi = at_hi & (g + nu > _DUAL_TOL)

        if not (prim_lo.any() or prim_hi.any() or dual_lo.any() or dual_hi.any()):
            z = np.clip(z, 0.0, 1.0)
            return z, float(0.5 * z @ A @ z + c @ z)

        at_lo = (at_lo & ~dual_lo) | prim_lo
        at_hi = (at_hi & ~dual_hi) | prim_hi
    return None


def _box_qp_solve(A: np.ndarray, c: np.ndarray, budget: int,
                  z0: np.ndarray) -> tuple[np.ndarray, float, bool]:
    """Shared inner solver: active-set first, projected gradient fallback."""
    solved = _pdas(A, c, budget, z0)
    if solved is None:
        m = z0.size
        lipschitz = float(np.linalg.eigvalsh(A)[-1]) if m > 1 else float(A[0, 0])
        step = 1.0 / max(lipschitz, 1e-12)
        z1, _ = _fista(A, c, budget, z0, step, iters=150)
        solved = _pdas(A, c, budget, z1)
        if solved is None:
            z2, v2 = _fista(A, c, budget, z1, step, iters=800)
            solved = _pdas(A, c, budget, z2)
            if solved is None:
                return z2, v2, False
    z, val = solved
    return z, val, True


def _fista(A: np.ndarray, c: np.ndarray, budget: int, z: np.ndarray,
           step: float, iters: int):
    """Monotone accelerated projected gradient; returns the best iterate."""

    def fval(x: np.ndarray) -> float:
        return float(0.5 * x @ A @ x + c @ x)

    y = z.copy()
    t_mom = 1.0
    best = z
    best_val = fval(z)
    for _ in range(iters):
        z_new = project_capped_simplex(y - step * (A @ y + c), budget)
        v_new = fval(z_new)
        if v_new > best_val:  # restart momentum on objective increase
            y = z.copy()
            t_mom = 1.0
            z_new = project_capped_simplex(y - step * (A @ y + c), budget)
            v_new = fval(z_new)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = z_new + ((t_mom - 1.0) / t_next) * (z_new - z)
        t_mom = t_next
        z = z_new
        if v_new < best_val:
            best_val = v_new
            best = z_new
    return best, best_val


def solve_relaxation(inst: BqpInstance, fixed: dict[int, int] | None = None,
                     warm_start: np.ndarray | None = None) -> RelaxationResult:
    """Convex box relaxation at one search node.

    Minimizes the convexified objective over ``[0,1]^N`` intersected with
    the budget plane, honoring coordinates pinned by ``fixed``.  The
    primal-dual active-set method solves the node QP exactly in a few
    direct KKT solves; if it fails to settle, accelerated projected
    gradient supplies a fallback whose bound keeps a safety slack
    (``exact=False``).  Raises :class:`InfeasibleFixing` when the pinned
    coordinates cannot reach the budget.
    """
    n = inst.size
    fixed = fixed or {}
    state = np.full(n, -1, dtype=int)
    for pos, val in fixed.items():
        if val not in (0, 1):
            raise ValueError("fixed values must be 0 or 1")
        state[pos] = val
    ones = np.flatnonzero(state == 1)
    free = np.flatnonzero(state == -1)
    k_free = inst.K - ones.size
    if k_free < 0 or k_free > free.size:
        raise InfeasibleFixing(f"budget {inst.K} unreachable with {ones.size} pinned ones")

    u_full = np.zeros(n)
    u_full[ones] = 1.0
    const = float(0.5 * inst.Q[np.ix_(ones, ones)].sum() + inst.f[ones].sum())

    if free.size == 0 or k_free == 0:
        return RelaxationResult(value=const, u=u_full, exact=True)
    if k_free == free.size:
        u_full[free] = 1.0
        val = float(0.5 * u_full @ inst.Q @ u_full + u_full @ inst.f)
        return RelaxationResult(value=val, u=u_full, exact=True)

    A = inst.Q[np.ix_(free, free)]
    c = inst.f[free] + inst.Q[np.ix_(free, ones)].sum(axis=1)

    if not A.any():
        # linear objective: the optimum sits on the k smallest coefficients
        order = np.argsort(c, kind="stable")
        z = np.zeros(free.size)
        z[order[:k_free]] = 1.0
        u_full[free] = z
        return RelaxationResult(value=float(c @ z) + const, u=u_full, exact=True)

    if warm_start is not None:
        z0 = project_capped_simplex(np.asarray(warm_start, dtype=float)[free], k_free)
    else:
        z0 = np.full(free.size, k_free / free.size)

    z, val, exact = _box_qp_solve(A, c, k_free, z0)
    u_full[free] = z
    return RelaxationResult(value=val + const, u=u_full, exact=exact)


def _solve_node(Q: np.ndarray, f: np.ndarray, M: np.ndarray, K: int,
                fixed: dict[int, int],
                warm: np.ndarray | None) -> tuple[float, np.ndarray, bool]:
    """Bound one search node in original-objective units.

    The quadratic block over the still-free coordinates is convexified
    with a per-coordinate diagonal shift (each entry's absolute row sum
    in the free submatrix, PSD by diagonal dominance).  Binary points
    satisfy u_i^2 = u_i, so the shift folds back into the linear term
    and the relaxed objective agrees with the original one at every
    binary completion: the relaxation value is directly a valid lower
    bound, with no additive constant.  The shift shrinks as coordinates
    get fixed, tightening bounds deep in the tree.
    """
    n = f.size
    state = np.full(n, -1, dtype=int)
    for idx, val in fixed.items():
        state[idx] = val
    free = np.flatnonzero(state < 0)
    ones = np.flatnonzero(state == 1)
    k_free = K - ones.size
    if k_free < 0 or k_free > free.size:
        raise InfeasibleFixing(f"cannot place {k_free} picks in {free.size} free slots")

    u_full = np.zeros(n)
    u_full[ones] = 1.0
    const = float(0.5 * u_full @ Q @ u_full + u_full @ f)
    if k_free == 0:
        return const, u_full, True

    c = f[free] + Q[np.ix_(free, ones)].sum(axis=1)
    sub = M[np.ix_(free, free)]
    d = np.abs(sub).sum(axis=1)
    if not d.any():
        # free block is interaction-free: the relaxation is a linear
        # program whose optimum is the k_free smallest coefficients
        order = np.argsort(c, kind="stable")
        z = np.zeros(free.size)
        z[order[:k_free]] = 1.0
        u_full[free] = z
        return float(c @ z) + const, u_full, True

    # the extra margin keeps A strictly diagonally dominant (hence
    # nonsingular KKT blocks); folded into the linear term it leaves the
    # relaxation exact at binary points and only loosens fractional
    # bounds by a negligible amount
    d = d + 1e-7 * (1.0 + float(d.max()))
    A = np.diag(d) - sub
    if warm is not None:
        z0 = project_capped_simplex(warm[free], k_free)
    else:
        z0 = np.full(free.size, k_free / free.size)
    z, val, exact = _box_qp_solve(A, c - 0.5 * d, k_free, z0)
    u_full[free] = z
    return val + const, u_full, exact


def _greedy_warm_start(problem: QueryProblem) -> tuple[int, ...]:
    """Deterministic greedy + best-swap local search used as incumbent.

    With M = 0 this reduces exactly to the top-K entropies with
    lowest-index tie-breaking.
    """
    h, M, K, n = problem.h, problem.M, problem.K, problem.size
    chosen: list[int] = []
    in_set = np.zeros(n, dtype=bool)
    add_gain = h - M.sum(axis=1)
    for _ in range(K):
        masked = np.where(in_set, -np.inf, add_gain)
        pick = int(np.argmax(masked))
        chosen.append(pick)
        in_set[pick] = True
        add_gain = add_gain + M[pick]
    best = sorted(chosen)
    best_val = objective_of_set(problem, best)
    for _ in range(10):
        improved = False
        best_swap = None
        swap_val = best_val
        outside = [i for i in range(n) if not in_set[i]]
        for out in best:
            for inn in outside:
                cand = sorted(set(best) - {out} | {inn})
                val = objective_of_set(problem, cand)
                if val < swap_val - 1e-12:
                    swap_val = val
                    best_swap = cand
        if best_swap is not None:
            best = best_swap
            best_val = swap_val
            in_set[:] = False
            in_set[best] = True
            improved = True
        if not improved:
            break
    return tuple(best)


def select_batch(problem: QueryProblem) -> Selection:
    """Certified-optimal K-subset selection by branch and bound.

    Depth-first search with best-bound child ordering; branching on the
    most fractional coordinate (lowest index on ties).  Every explored
    node solves one box relaxation; verified KKT bounds prune with a
    machine-precision margin, unverified ones retain a safety slack so
    the optimum can never be pruned away.
    """
    base = from_problem(problem)
    Q, f, M = base.Q, base.f, problem.M
    n, K = problem.size, problem.K

    warm = _greedy_warm_start(problem)
    inc_set = warm
    inc_obj = objective_of_set(problem, warm)

    nodes_explored = 0
    Node = tuple[dict[int, int], "np.ndarray | None", float]
    stack: list[Node] = [({}, None, -np.inf)]

    while stack:
        fixed, warm_u, parent_bound = stack.pop()
        if parent_bound >= inc_obj - PRUNE_TOL:
            # incumbent improved since this child was pushed
            continue
        try:
            bound, u, exact = _solve_node(Q, f, M, K, fixed, warm_u)
        except InfeasibleFixing:
            continue
        nodes_explored += 1
        if not exact:
            bound -= FALLBACK_SLACK
        if bound >= inc_obj - PRUNE_TOL:
            continue

        frac = np.abs(u - np.round(u))
        frac[list(fixed)] = 0.0
        if float(frac.max()) <= INT_TOL:
            cand = tuple(sorted(int(i) for i in np.flatnonzero(np.round(u) > 0.5)))
            if len(cand) == K:
                cand_obj = objective_of_set(problem, cand)
                if cand_obj < inc_obj - PRUNE_TOL:
                    inc_set, inc_obj = cand, cand_obj
            if exact:
                continue
            free_left = [i for i in range(n) if i not in fixed]
            if not free_left:
                continue
            branch = free_left[0]
        else:
            fr = np.where(frac > INT_TOL, np.abs(u - 0.5), np.inf)
            branch = int(np.argmin(fr))

        toward = 1 if u[branch] >= 0.5 else 0
        away = 1 - toward
        stack.append(({**fixed, branch: away}, u, bound))
        stack.append(({**fixed, branch: toward}, u, bound))

    return Selection(
        chosen=inc_set,
        objective_value=inc_obj,
        bb_nodes_explored=nodes_explored,
        certified_optimal=True)


def brute_force_select(problem: QueryProblem, max_candidates: int = 1_000_000) -> Selection:
    """Exhaustive reference selector for small pools.

    Enumerates all C(N, K) subsets in lexicographic order and keeps the
    first strict minimum, matching the lowest-index tie-break.
    """
    n, K = problem.size, problem.K
    total = 1
    for i in range(K):
        total = total * (n - i) // (i + 1)
    if total > max_candidates:
        raise ValueError(f"C({n},{K}) = {total} exceeds cap {max_candidates}")
    best_set: tuple[int, ...] | None = None
    best_val = np.inf
    count = 0
    for comb in itertools.combinations(range(n), K):
        count += 1
        val = objective_of_set(problem, comb)
        if val < best_val:
            best_val = val
            best_set = comb
    assert best_set is not None
    return Selection(
        chosen=best_set,
        objective_value=float(best_val),
        bb_nodes_explored=count,
        certified_optimal=True)

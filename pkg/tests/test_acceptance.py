"""Release-gate checks for the full pipeline.

Each test here is one gate: optimizer exactness, the convexification
contract, inference exactness on trees, the query-objective response to
labeling, classifier calculus, context-count arithmetic, the end-to-end
learning-curve comparisons on the planted synthetic stream, and
bit-level reproducibility of run outputs.  Run with ``-v`` for one
pass/fail line per gate.  The learning-curve gate drives 100 full
sessions and dominates the runtime; everything is seeded and
deterministic.
"""
import dataclasses
import time

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ctxal.context import new_context_model, update_context
from ctxal.graph import (
    EDGE_ACTIVITY,
    ActivityInstance,
    ContextObservation,
    CrfGraph,
    EdgeRecord,
    PotentialTable,
    condition,
)
from ctxal.harness.report import write_curve
from ctxal.harness.session import SessionConfig, run_session
from ctxal.harness.synth import GeneratorConfig, train_test_pair
from ctxal.inference import BpOptions, infer
from ctxal.infometrics import QueryProblem, approx_joint_entropy, build_query_problem
from ctxal.mlr import MlrModel, TeacherConfig, loss, gradient
from ctxal.optimizer import (
    brute_force_select,
    bqp_value,
    convexify,
    from_problem,
    select_batch,
)
from tests._oracles import (
    activity_joint_entropy,
    enumerate_marginals,
    random_tree_graph,
)
from tests.test_context import oracle_update

EXACT_BP = BpOptions(damping=0.0, tol=1e-12, max_iters=200)


def random_problem(rng, n, K, edge_prob=0.4, mi_hi=0.3):
    h = rng.uniform(0.0, 1.5, size=n)
    M = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                v = rng.uniform(0.0, mi_hi)
                M[i, j] = M[j, i] = v
    return QueryProblem(h=h, M=M, K=K, ids=tuple(f"n{i}" for i in range(n)))


def test_batch_selection_certifies_global_optimum():
    """100 random problems: branch-and-bound == exhaustive search, < 60 s."""
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    for trial in range(100):
        n = int(rng.integers(6, 13))
        K = int(rng.integers(1, 5))
        p = random_problem(rng, n, K)
        exact = select_batch(p)
        brute = brute_force_select(p)
        diff = abs(exact.objective_value - brute.objective_value)
        assert diff < 1e-9, f"trial {trial}: objective gap {diff:.3e}"
        assert exact.certified_optimal
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"100 certified selections took {elapsed:.1f}s"


def test_convexification_shifts_binary_objectives_by_constant():
    """Shift equals gamma*K/2 at every feasible binary point; Q+gamma*I is PSD."""
    rng = np.random.default_rng(102)
    for trial in range(20):
        n = int(rng.integers(6, 13))
        K = int(rng.integers(1, 5))
        p = random_problem(rng, n, K, edge_prob=0.5)
        inst = from_problem(p)
        conv = convexify(inst)
        expected = conv.gamma * K / 2.0
        for _ in range(50):
            u = np.zeros(n)
            u[rng.choice(n, size=K, replace=False)] = 1.0
            shift = bqp_value(u, conv) - bqp_value(u, inst)
            assert abs(shift - expected) < 1e-10, \
                f"trial {trial}: shift {shift!r} != {expected!r}"
        eigvals = np.linalg.eigvalsh(conv.Q)
        assert eigvals.min() >= -1e-9, f"trial {trial}: eig {eigvals.min():.3e}"


def test_selection_degenerates_to_entropy_ranking_without_interactions():
    """With zero interaction mass the batch is the top-K entropies, 100/100."""
    rng = np.random.default_rng(103)
    hits = 0
    for _ in range(100):
        n = int(rng.integers(5, 13))
        K = int(rng.integers(1, min(5, n + 1)))
        h = rng.uniform(0.0, 2.0, size=n)
        p = QueryProblem(h=h, M=np.zeros((n, n)), K=K,
                         ids=tuple(f"n{i}" for i in range(n)))
        expected = tuple(sorted(sorted(range(n), key=lambda i: (-h[i], i))[:K]))
        hits += select_batch(p).chosen == expected
    assert hits == 100, f"only {hits}/100 reduced to entropy ranking"


def test_tree_inference_and_entropy_approximation_are_exact():
    """50 random trees: marginals to 1e-8, entropy-minus-MI sum to 1e-6."""
    rng = np.random.default_rng(104)
    for trial in range(50):
        n = int(rng.integers(2, 9))
        q = int(rng.integers(2, 4))
        graph = random_tree_graph(rng, n, q, n_context=int(rng.integers(0, 3)))
        result = infer(graph, EXACT_BP)
        assert result.converged
        node_m, edge_m = enumerate_marginals(graph)
        for node_id, exact in node_m.items():
            assert_allclose(result.node_marginals[node_id], exact, atol=1e-8,
                            err_msg=f"trial {trial} node {node_id}")
        for endpoints, exact in edge_m.items():
            assert_allclose(result.edge_marginals[endpoints], exact, atol=1e-8,
                            err_msg=f"trial {trial} edge {endpoints}")
        problem = build_query_problem(graph, result, K=1)
        approx = approx_joint_entropy(problem)
        exact_H = activity_joint_entropy(graph)
        assert abs(approx - exact_H) < 1e-6, \
            f"trial {trial}: approx {approx} vs exact {exact_H}"


def test_labeling_a_node_removes_it_from_the_query_objective():
    """After conditioning, the labeled node carries zero entropy and MI."""
    rng = np.random.default_rng(105)
    for trial in range(20):
        n = int(rng.integers(4, 9))
        q = int(rng.integers(2, 4))
        graph = random_tree_graph(rng, n, q, n_context=int(rng.integers(0, 3)))
        # close a loop or two so the check covers loopy graphs as well
        present = {frozenset(e.endpoints) for e in graph.edges
                   if e.kind == EDGE_ACTIVITY}
        extra = []
        for _ in range(int(rng.integers(0, 3))):
            i, j = rng.choice(n, size=2, replace=False)
            a, b = graph.activity_nodes[i].id, graph.activity_nodes[j].id
            if frozenset((a, b)) in present:
                continue
            present.add(frozenset((a, b)))
            extra.append(EdgeRecord(
                endpoints=(a, b), kind=EDGE_ACTIVITY,
                table=PotentialTable(values=rng.uniform(0.2, 1.0, size=(q, q)))))
        graph = CrfGraph(class_count=q, activity_nodes=graph.activity_nodes,
                         context_nodes=graph.context_nodes,
                         edges=graph.edges + tuple(extra))

        target = graph.activity_nodes[int(rng.integers(0, n))].id
        labeled = condition(graph, {target: int(rng.integers(0, q))})
        marginals = infer(labeled)
        problem = build_query_problem(marginals=marginals, graph=labeled,
                                      K=min(2, n))
        k = problem.index_of(target)
        assert problem.h[k] <= 1e-9, f"trial {trial}: h {problem.h[k]:.3e}"
        incident = max(problem.M[k].max(), problem.M[:, k].max())
        assert incident <= 1e-9, f"trial {trial}: MI {incident:.3e}"


def test_classifier_gradient_and_convexity():
    """Analytic gradient vs central differences; midpoint convexity."""
    rng = np.random.default_rng(106)
    for trial in range(20):
        q = int(rng.integers(3, 6))
        d = int(rng.integers(4, 9))
        m = int(rng.integers(3, 11))
        model = MlrModel(theta=rng.normal(size=(q, d)), weight_decay=1e-3)
        X = rng.normal(size=(m, d))
        y = rng.integers(0, q, size=m)
        g = gradient(model, X, y)
        fd = np.zeros_like(g)
        eps = 1e-6
        for i in range(q):
            for j in range(d):
                model.theta[i, j] += eps
                hi = loss(model, X, y)
                model.theta[i, j] -= 2 * eps
                lo = loss(model, X, y)
                model.theta[i, j] += eps
                fd[i, j] = (hi - lo) / (2 * eps)
        rel = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)
        assert rel < 1e-5, f"trial {trial}: gradient mismatch {rel:.3e}"

    for trial in range(100):
        q, d, m = 4, 6, 8
        X = rng.normal(size=(m, d))
        y = rng.integers(0, q, size=m)
        ta = rng.normal(scale=2.0, size=(q, d))
        tb = rng.normal(scale=2.0, size=(q, d))
        f = lambda t: loss(MlrModel(theta=t, weight_decay=1e-3), X, y)
        mid = f((ta + tb) / 2.0)
        assert mid <= (f(ta) + f(tb)) / 2.0 + 1e-12, f"triple {trial}"


def _context_batch(rng, n):
    pmf_dims = {"object": 4}
    instances = []
    for i in range(n):
        obs = []
        if rng.random() < 0.7:
            pmf = rng.uniform(0.1, 1.0, size=4)
            obs.append(ContextObservation(
                kind="object", prior_pmf=pmf / pmf.sum(),
                spatial_pos=rng.uniform(0, 5, size=2)))
        if rng.random() < 0.5:
            obs.append(ContextObservation(
                kind="person", scalar_value=float(rng.uniform(0, 10))))
        instances.append(ActivityInstance(
            id=f"i{i}", features=np.array([0.0]),
            spatial_pos=rng.uniform(0, 5, size=2),
            temporal_pos=float(rng.uniform(0, 20)),
            context_obs=tuple(obs)))
    labels = rng.integers(0, 3, size=n)
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.4:
                adj[i, j] = adj[j, i] = True
    return pmf_dims, instances, labels, adj


def test_context_updates_match_elementwise_reference():
    """Count tables exactly; running moments vs batch moments to 1e-9."""
    from ctxal.context import BinningScheme

    rng = np.random.default_rng(107)
    scheme = BinningScheme.from_range(0.0, 10.0, bins=4)
    accum = new_context_model(3, pmf_kinds={"object": 4},
                              scalar_kinds={"person": scheme})
    all_t, all_s, all_vals = [], [], []
    for trial in range(50):
        pmf_dims, instances, labels, adj = _context_batch(rng, int(rng.integers(6, 12)))
        model = new_context_model(3, pmf_kinds=pmf_dims,
                                  scalar_kinds={"person": scheme})
        update_context(model, labels, adj, instances)
        fa, fc, t_gaps, s_gaps, offsets, values, class_values = oracle_update(
            3, labels, adj, instances, pmf_dims, scheme)
        assert np.array_equal(model.cooccur_activity.counts, fa), f"trial {trial}"
        assert np.array_equal(model.cooccur["object"].counts, fc["object"]), \
            f"trial {trial}"
        assert model.temporal_gap.count == len(t_gaps)
        assert model.value_stats["person"].count == len(values)
        for c in range(3):
            assert model.class_value_stats["person"][c].count == len(class_values[c])
        if offsets["object"]:
            assert_allclose(model.context_offset["object"].mean,
                            np.mean(offsets["object"]), rtol=1e-9)

        update_context(accum, labels, adj, instances)
        all_t.extend(t_gaps)
        all_s.extend(s_gaps)
        all_vals.extend(values)

    for running, collected in ((accum.temporal_gap, all_t),
                               (accum.spatial_gap, all_s),
                               (accum.value_stats["person"], all_vals)):
        batch = np.asarray(collected)
        assert running.count == batch.size
        assert_allclose(running.mean, batch.mean(), rtol=1e-9, atol=1e-9)
        assert_allclose(running.variance, batch.var(), rtol=1e-9, atol=1e-9)


SWEEP_ARMS = {
    "all": dict(strategy="caqs", teacher=TeacherConfig(mode="all_instances")),
    "caqs20": dict(strategy="caqs",
                   teacher=TeacherConfig(mode="strong_only", k_fraction=0.2)),
    "caqs30": dict(strategy="caqs",
                   teacher=TeacherConfig(mode="strong_only", k_fraction=0.3)),
    "caqs40": dict(strategy="caqs",
                   teacher=TeacherConfig(mode="strong_only", k_fraction=0.4)),
    "rand20": dict(strategy="random",
                   teacher=TeacherConfig(mode="strong_only", k_fraction=0.2)),
    "rand30": dict(strategy="random",
                   teacher=TeacherConfig(mode="strong_only", k_fraction=0.3)),
    "rand40": dict(strategy="random",
                   teacher=TeacherConfig(mode="strong_only", k_fraction=0.4)),
    "noctx40": dict(strategy="caqs_no_context",
                    teacher=TeacherConfig(mode="strong_only", k_fraction=0.4)),
    "weak": dict(strategy="caqs", teacher=TeacherConfig(mode="weak_only")),
    "spw30": dict(strategy="caqs",
                  teacher=TeacherConfig(mode="strong_plus_weak",
                                        k_fraction=0.3, delta=0.9)),
}


def test_learning_curve_trends_across_budgets():
    """2000-instance stream, 10 seeds, 10 arms; the whole sweep < 10 min.

    The budget fractions apply per round on top of the shared 20%
    bootstrap prefix every arm pays, including the full-supervision arm.
    The prefix is deliberately generous: the context tables it seeds have
    to absorb mislabeled increments from inferred batch labels later on,
    and a thin prefix lets one polluted class turn into a catch-all that
    wins every ambiguous node for the rest of the session.
    """
    start = time.perf_counter()
    acc = {arm: [] for arm in SWEEP_ARMS}
    for seed in range(10):
        train, test = train_test_pair(
            GeneratorConfig(instance_count=2000, seed=seed), 500)
        for arm, spec in SWEEP_ARMS.items():
            config = SessionConfig(batch_size=50, seed=seed,
                                   init_fraction=0.2, **spec)
            acc[arm].append(run_session(train, test, config).final_accuracy)
    elapsed = time.perf_counter() - start
    mean = {arm: float(np.mean(vals)) for arm, vals in acc.items()}
    summary = " ".join(f"{arm}={val:.3f}" for arm, val in mean.items())

    # (a) 40% budget lands within 2 points of full supervision
    assert mean["all"] - mean["caqs40"] <= 0.02, summary
    # (b) selection beats random at every budget, clearly at 30%
    for k in ("20", "30", "40"):
        assert mean[f"caqs{k}"] >= mean[f"rand{k}"], summary
    assert mean["caqs30"] - mean["rand30"] > 0.03, summary
    # (c) context modeling pays when detections are reliable
    assert mean["caqs40"] >= mean["noctx40"], summary
    # (d) self-labels alone stall far below the mixed-teacher run
    assert mean["weak"] < mean["spw30"], summary
    assert elapsed < 600.0, f"sweep took {elapsed:.0f}s: {summary}"


def test_identical_configs_produce_identical_curve_files(tmp_path):
    """Same seed and config twice: byte-identical curve outputs."""
    train, test = train_test_pair(GeneratorConfig(instance_count=400, seed=2), 150)
    config = SessionConfig(
        batch_size=50, strategy="caqs", seed=2, eval_every=2,
        teacher=TeacherConfig(mode="strong_plus_weak", k_fraction=0.25))
    paths = []
    for name in ("one.csv", "two.csv"):
        result = run_session(train, test, config)
        path = tmp_path / name
        write_curve(path, list(result.curve), arm="caqs")
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()

"""Streaming labeling sessions.

A session consumes the event stream in fixed windows.  Each round builds
the window's graph, infers marginals, picks a query batch for the strong
teacher, absorbs the returned labels (plus optional self-labels) into
the classifier, and folds the round's inferred labels into the context
statistics.  ``run_session`` drives the loop with the dataset's own
labels standing in for the teacher; the HTTP service drives the same
state machine with human answers instead.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace

import numpy as np

from ..context import BinningScheme, new_context_model, update_context
from ..graph import build_graph, condition
from ..inference import BpOptions, infer, predict_labels
from ..infometrics import build_query_problem, node_entropy
from ..links import fit_links, gap_vector, link_mask
from ..mlr import (
    TeacherConfig,
    classify_batch,
    fit,
    incremental_update,
    weak_teacher,
    zero_model,
)
from ..optimizer import brute_force_select, select_batch
from .synth import EventDataset

STRATEGIES = ("caqs", "caqs_no_context", "random", "entropy_topk",
              "brute_force_oracle")

# the bootstrap prefix alone yields ~20k pairs; the run/no-run boundary
# is separable enough that a small recent window fits the same weights
MAX_LINK_PAIRS = 6000


@dataclass(frozen=True)
class SessionConfig:
    batch_size: int = 50
    strategy: str = "caqs"
    teacher: TeacherConfig = field(default_factory=TeacherConfig)
    bp: BpOptions = field(default_factory=BpOptions)
    seed: int = 0
    init_fraction: float = 0.1
    init_epochs: int = 300
    eval_every: int = 0
    weight_decay: float = 1e-3
    learning_rate: float = 0.1
    buffer_capacity: int = 32
    flush_epochs: int = 10
    bins: int = 8

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0.0 < self.init_fraction < 1.0):
            raise ValueError("init_fraction must lie in (0, 1)")
        if self.eval_every < 0:
            raise ValueError("eval_every must be >= 0")


@dataclass(frozen=True)
class QueryBatch:
    round_index: int
    query_ids: tuple[str, ...]
    marginals: dict[str, np.ndarray]
    entropies: dict[str, float]
    window_ids: tuple[str, ...]


@dataclass(frozen=True)
class CurvePoint:
    round_index: int
    seen: int
    strong_total: int
    weak_total: int
    accuracy: float | None


@dataclass(frozen=True)
class SessionResult:
    final_accuracy: float
    curve: tuple[CurvePoint, ...]
    strong_total: int
    weak_total: int
    seen: int
    rounds: int


def attribute_schema(instances) -> tuple[dict[str, int], dict[str, tuple[float, float]]]:
    """Scan observations for attribute kinds, category dims and value ranges."""
    pmf_kinds: dict[str, int] = {}
    ranges: dict[str, list[float]] = {}
    for inst in instances:
        for obs in inst.context_obs:
            if obs.prior_pmf is not None:
                dim = int(obs.prior_pmf.size)
                if pmf_kinds.setdefault(obs.key, dim) != dim:
                    raise ValueError(
                        f"attribute kind {obs.key!r} has inconsistent category counts")
            else:
                value = float(obs.scalar_value)
                lohi = ranges.setdefault(obs.key, [value, value])
                lohi[0] = min(lohi[0], value)
                lohi[1] = max(lohi[1], value)
    scalar_kinds = {}
    for key, (lo, hi) in ranges.items():
        if hi <= lo:
            hi = lo + 1.0
        # pad so held-out values near the observed extremes stay in range
        pad = 0.05 * (hi - lo)
        scalar_kinds[key] = (lo - pad, hi + pad)
    return pmf_kinds, scalar_kinds


class SessionState:
    """One streaming session's mutable state."""

    def __init__(self, dataset: EventDataset, config: SessionConfig,
                 test_dataset: EventDataset | None = None):
        if len(dataset) < 2:
            raise ValueError("dataset too small for a session")
        self.dataset = dataset
        self.config = config
        self.test_dataset = test_dataset
        self.rng = np.random.default_rng(config.seed)

        q, d = dataset.class_count, dataset.feature_dim
        self.classifier = zero_model(
            q, d,
            weight_decay=config.weight_decay,
            learning_rate=config.learning_rate,
            buffer_capacity=config.buffer_capacity,
            epochs_per_flush=config.flush_epochs)

        pmf_kinds, scalar_ranges = attribute_schema(dataset.instances)
        scalar_kinds = {
            key: BinningScheme.from_range(lo, hi, bins=config.bins)
            for key, (lo, hi) in scalar_ranges.items()}
        self.context = new_context_model(q, pmf_kinds=pmf_kinds,
                                         scalar_kinds=scalar_kinds)

        self.truth = dataset.labels()
        self.pointer = 0
        self.round_index = 0
        self.strong_total = 0
        self.weak_total = 0
        self.curve: list[CurvePoint] = []
        self.pending: dict | None = None
        self.last_entropies: dict[str, float] = {}
        self._link_gaps: list[np.ndarray] = []
        self._link_targets: list[float] = []
        self._bootstrapped = False

    # ---------------------------------------------------------------- setup

    def bootstrap(self) -> None:
        """Label the stream prefix in full and fit the starting models."""
        if self._bootstrapped:
            raise RuntimeError("session already bootstrapped")
        n_init = max(self.dataset.class_count * 2,
                     int(round(self.config.init_fraction * len(self.dataset))))
        n_init = min(n_init, len(self.dataset) - 1)
        prefix = self.dataset.instances[:n_init]
        missing = [i.id for i in prefix if i.true_label is None]
        if missing:
            raise ValueError(f"bootstrap prefix lacks labels: {missing[:3]}")

        X = np.stack([inst.features for inst in prefix])
        y = np.array([int(inst.true_label) for inst in prefix])
        fit(self.classifier, X, y, epochs=self.config.init_epochs)

        self._accumulate_link_pairs(prefix)
        self._refit_links()

        if self.config.strategy != "caqs_no_context":
            times = np.array([i.temporal_pos for i in prefix])
            positions = np.stack([i.spatial_pos for i in prefix])
            adjacency = link_mask(self.context.link_predictor, times, positions)
            update_context(self.context, y, adjacency, prefix)

        self.pointer = n_init
        self.strong_total = n_init
        self._bootstrapped = True

    # ------------------------------------------------------------- querying

    def done(self) -> bool:
        return self.pointer >= len(self.dataset)

    def propose(self) -> QueryBatch | None:
        """Infer the next window and pick its strong-teacher queries."""
        if not self._bootstrapped:
            raise RuntimeError("bootstrap the session first")
        if self.pending is not None:
            raise RuntimeError("previous round still awaiting labels")
        if self.done():
            return None

        window = list(self.dataset.instances[
            self.pointer:self.pointer + self.config.batch_size])
        window_ids = tuple(sorted(inst.id for inst in window))
        budget = self.config.teacher.batch_budget(len(window))

        if self.config.strategy == "caqs_no_context":
            feats = np.stack([inst.features
                              for inst in sorted(window, key=lambda i: i.id)])
            posterior = classify_batch(self.classifier, feats)
            marginals = {wid: posterior[i] for i, wid in enumerate(window_ids)}
            graph = None
            inferred = None
        else:
            graph = build_graph(window, self.classifier, self.context)
            inferred = infer(graph, self.config.bp)
            marginals = {wid: inferred.node_marginals[wid] for wid in window_ids}

        entropies = {wid: node_entropy(pmf) for wid, pmf in marginals.items()}
        query_ids = self._select(window_ids, marginals, entropies, budget,
                                 graph, inferred)

        self.pending = {
            "window": window,
            "window_ids": window_ids,
            "graph": graph,
            "inferred": inferred,
            "marginals": marginals,
            "query_ids": query_ids,
        }
        return QueryBatch(round_index=self.round_index, query_ids=query_ids,
                          marginals={qid: marginals[qid] for qid in query_ids},
                          entropies=entropies, window_ids=window_ids)

    def _select(self, window_ids, marginals, entropies, budget,
                graph, inferred) -> tuple[str, ...]:
        if budget <= 0:
            return ()
        if budget >= len(window_ids):
            return tuple(window_ids)
        strategy = self.config.strategy
        if strategy == "random":
            picks = self.rng.choice(len(window_ids), size=budget, replace=False)
            return tuple(window_ids[i] for i in sorted(picks))
        if strategy in ("caqs_no_context", "entropy_topk"):
            ranked = sorted(window_ids,
                            key=lambda wid: (-entropies[wid], wid))
            return tuple(sorted(ranked[:budget]))
        problem = build_query_problem(graph, inferred, K=budget)
        if strategy == "caqs":
            chosen = select_batch(problem).chosen
        elif strategy == "brute_force_oracle":
            chosen = brute_force_select(problem).chosen
        else:  # pragma: no cover - guarded by SessionConfig validation
            raise ValueError(f"unhandled strategy {strategy!r}")
        return tuple(problem.ids[i] for i in chosen)

    # ------------------------------------------------------------- labeling

    def absorb(self, labels: dict[str, int]) -> dict[str, float]:
        """Apply one round of teacher labels and update every model.

        Returns the post-conditioning entropy of each window node, which
        is zero for freshly labeled ones.
        """
        if self.pending is None:
            raise RuntimeError("no round awaiting labels")
        pend = self.pending
        expected = set(pend["query_ids"])
        got = set(labels)
        if got != expected:
            raise ValueError(
                f"labels must cover exactly the queried ids; "
                f"missing {sorted(expected - got)[:3]}, extra {sorted(got - expected)[:3]}")
        q = self.dataset.class_count
        for node_id, lab in labels.items():
            if not (0 <= int(lab) < q):
                raise ValueError(f"label {lab!r} out of range for {node_id!r}")
        strong = {node_id: int(lab) for node_id, lab in labels.items()}

        window = pend["window"]
        window_ids = pend["window_ids"]
        teacher = self.config.teacher

        if self.config.strategy == "caqs_no_context":
            final_marginals = dict(pend["marginals"])
            for node_id, lab in strong.items():
                one_hot = np.zeros(q)
                one_hot[lab] = 1.0
                final_marginals[node_id] = one_hot
        elif strong:
            conditioned = condition(pend["graph"], strong)
            final = infer(conditioned, self.config.bp)
            final_marginals = {wid: final.node_marginals[wid] for wid in window_ids}
        else:
            final_marginals = pend["marginals"]

        weak: dict[str, int] = {}
        if teacher.uses_weak:
            weak = weak_teacher(final_marginals, teacher.delta,
                                exclude=frozenset(strong))

        inst_by_id = {inst.id: inst for inst in window}
        train_x: list[np.ndarray] = []
        train_y: list[int] = []
        if teacher.uses_strong:
            for node_id, lab in strong.items():
                train_x.append(inst_by_id[node_id].features)
                train_y.append(lab)
        for node_id, lab in weak.items():
            train_x.append(inst_by_id[node_id].features)
            train_y.append(lab)
        if train_x:
            incremental_update(self.classifier, np.stack(train_x),
                               np.asarray(train_y, dtype=int))

        if self.config.strategy != "caqs_no_context":
            order = window_ids
            final_labels = np.array([
                strong.get(wid, int(np.argmax(final_marginals[wid])))
                for wid in order])
            ordered_insts = [inst_by_id[wid] for wid in order]
            adjacency = pend["graph"].adjacency()
            update_context(self.context, final_labels, adjacency, ordered_insts)
            self._accumulate_link_pairs(window)
            self._refit_links()

        self.last_entropies = {wid: node_entropy(final_marginals[wid])
                               for wid in window_ids}
        self.pointer += len(window)
        self.round_index += 1
        self.strong_total += len(strong)
        self.weak_total += len(weak)
        self.pending = None

        accuracy = None
        should_eval = (self.test_dataset is not None
                       and self.config.eval_every > 0
                       and (self.round_index % self.config.eval_every == 0
                            or self.done()))
        if should_eval:
            accuracy = self.evaluate(self.test_dataset)
        self.curve.append(CurvePoint(
            round_index=self.round_index, seen=self.pointer,
            strong_total=self.strong_total, weak_total=self.weak_total,
            accuracy=accuracy))
        return self.last_entropies

    # ---------------------------------------------------------------- links

    def _accumulate_link_pairs(self, instances) -> None:
        seqs = self.dataset.seqs
        items = sorted(instances, key=lambda i: i.id)
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                a, b = items[i], items[j]
                vec = gap_vector(a, b)
                self._link_gaps.append(vec[1:])
                self._link_targets.append(1.0 if seqs[a.id] == seqs[b.id] else 0.0)
        if len(self._link_targets) > MAX_LINK_PAIRS:
            self._link_gaps = self._link_gaps[-MAX_LINK_PAIRS:]
            self._link_targets = self._link_targets[-MAX_LINK_PAIRS:]

    def _refit_links(self) -> None:
        gaps = np.stack(self._link_gaps)
        targets = np.asarray(self._link_targets)
        self.context.link_predictor = fit_links(gaps, targets)

    # ----------------------------------------------------------- evaluation

    def evaluate(self, test_dataset: EventDataset) -> float:
        """Accuracy on a held-out stream with the current models."""
        truth = test_dataset.labels()
        if self.config.strategy == "caqs_no_context":
            feats = np.stack([i.features for i in test_dataset.instances])
            preds = np.argmax(classify_batch(self.classifier, feats), axis=1)
            hits = sum(int(preds[k]) == truth[inst.id]
                       for k, inst in enumerate(test_dataset.instances))
            return hits / len(test_dataset)
        graph = build_graph(test_dataset.instances, self.classifier, self.context)
        marginals = infer(graph, self.config.bp)
        preds = predict_labels(marginals, ids=graph.activity_ids)
        hits = sum(int(preds[node_id] == truth[node_id]) for node_id in preds)
        return hits / len(test_dataset)


def run_session(train: EventDataset, test: EventDataset,
                config: SessionConfig) -> SessionResult:
    """Drive a full session with the dataset's labels as the teacher."""
    state = SessionState(train, config, test_dataset=test)
    state.bootstrap()
    truth = train.labels()
    while True:
        batch = state.propose()
        if batch is None:
            break
        state.absorb({qid: truth[qid] for qid in batch.query_ids})
    final = state.evaluate(test)
    if state.curve and state.curve[-1].accuracy is None:
        state.curve[-1] = replace(state.curve[-1], accuracy=final)
    return SessionResult(
        final_accuracy=final,
        curve=tuple(state.curve),
        strong_total=state.strong_total,
        weak_total=state.weak_total,
        seen=state.pointer,
        rounds=state.round_index)


def fork_state(state: SessionState) -> SessionState:
    """Deep copy for what-if runs that share an expensive bootstrap."""
    return copy.deepcopy(state)

"""HTTP labeling service.

A thin synchronous wrapper around one ``SessionState``: the annotation
frontend fetches the pending query batch, a human (or the dataset's own
labels in oracle mode) answers, and the posted labels drive the same
absorb step the oracle loop uses.  The round blocks until labels arrive;
DELETE /queries aborts the pending round so it can be re-proposed.
"""
from __future__ import annotations

from fastapi import Body, FastAPI, HTTPException

from ..infometrics import build_query_problem, node_entropy
from .session import SessionState

API_VERSION = 1


def _window_mi(state: SessionState):
    """(ids, M) for the pending window, or None when no graph was built.

    caqs_no_context rounds carry no graph, so they report no pairwise
    information; the payloads degrade to empty neighbor/edge lists.
    """
    pend = state.pending
    if pend is None or pend["graph"] is None:
        return None
    problem = build_query_problem(pend["graph"], pend["inferred"], K=1)
    return problem.ids, problem.M


def _snapshot(state: SessionState) -> dict:
    """Current window view: pending queries if any, else the last result."""
    if state.pending is not None:
        pend = state.pending
        queried = set(pend["query_ids"])
        nodes = [{
            "id": wid,
            "entropy": node_entropy(pend["marginals"][wid]),
            "marginal": [float(p) for p in pend["marginals"][wid]],
            "queried": wid in queried,
        } for wid in pend["window_ids"]]
        edges = []
        mi = _window_mi(state)
        if mi is not None:
            ids, M = mi
            for i in range(len(ids)):
                for j in range(i + 1, len(ids)):
                    if M[i, j] > 0.0:
                        edges.append({"source": ids[i], "target": ids[j],
                                      "mi": float(M[i, j])})
        return {"version": API_VERSION, "round": state.round_index,
                "pending": True, "nodes": nodes, "edges": edges}
    nodes = [{"id": wid, "entropy": h, "marginal": None, "queried": False}
             for wid, h in sorted(state.last_entropies.items())]
    return {"version": API_VERSION, "round": state.round_index,
            "pending": False, "nodes": nodes, "edges": []}


def create_app(state: SessionState, oracle: bool = False) -> FastAPI:
    """Wrap a bootstrapped session in the labeling API.

    ``oracle`` allows POST /labels {"auto": true} to answer from the
    dataset's own labels, for scripted runs and round-trip tests.
    """
    if not state._bootstrapped:
        state.bootstrap()
    app = FastAPI(title="labeling service", docs_url=None, redoc_url=None)
    truth = state.dataset.labels() if oracle else None

    @app.get("/session")
    def session_info() -> dict:
        return {
            "version": API_VERSION,
            "round": state.round_index,
            "seen": state.pointer,
            "total": len(state.dataset),
            "class_count": state.dataset.class_count,
            "batch_size": state.config.batch_size,
            "strategy": state.config.strategy,
            "mode": state.config.teacher.mode,
            "strong_labels": state.strong_total,
            "weak_labels": state.weak_total,
            "pending": state.pending is not None,
            "done": state.pending is None and state.done(),
        }

    @app.get("/queries")
    def get_queries() -> dict:
        if state.pending is None:
            if state.done():
                return {"version": API_VERSION, "round": state.round_index,
                        "done": True, "queries": []}
            state.propose()
        pend = state.pending
        ranked = sorted(
            pend["query_ids"],
            key=lambda qid: (-node_entropy(pend["marginals"][qid]), qid))
        neighbors: dict[str, list] = {}
        mi = _window_mi(state)
        if mi is not None:
            ids, M = mi
            index = {nid: i for i, nid in enumerate(ids)}
            for qid in ranked:
                i = index[qid]
                pairs = [(float(M[i, j]), ids[j]) for j in range(len(ids))
                         if j != i and M[i, j] > 0.0]
                pairs.sort(key=lambda p: (-p[0], p[1]))
                neighbors[qid] = [{"id": nid, "mi": v} for v, nid in pairs]
        queries = [{
            "id": qid,
            "entropy": node_entropy(pend["marginals"][qid]),
            "marginal": [float(p) for p in pend["marginals"][qid]],
            "neighbors": neighbors.get(qid, []),
        } for qid in ranked]
        return {"version": API_VERSION, "round": state.round_index,
                "done": False, "queries": queries}

    @app.delete("/queries")
    def abort_round() -> dict:
        if state.pending is None:
            raise HTTPException(status_code=409, detail="no pending round to abort")
        state.pending = None
        return {"version": API_VERSION, "round": state.round_index,
                "aborted": True}

    @app.post("/labels")
    def post_labels(payload: dict = Body(...)) -> dict:
        if state.pending is None:
            raise HTTPException(status_code=409,
                                detail="no pending round; fetch /queries first")
        if payload.get("auto"):
            if truth is None:
                raise HTTPException(status_code=400,
                                    detail="auto labeling needs oracle mode")
            labels = {qid: truth[qid] for qid in state.pending["query_ids"]}
        else:
            raw = payload.get("labels")
            if not isinstance(raw, dict) or not all(
                    isinstance(k, str) for k in raw):
                raise HTTPException(status_code=400,
                                    detail="body must carry a labels object")
            try:
                labels = {k: int(v) for k, v in raw.items()}
            except (TypeError, ValueError):
                raise HTTPException(status_code=400,
                                    detail="labels must be class indices")
        try:
            entropies = state.absorb(labels)
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {
            "version": API_VERSION,
            "round": state.round_index,
            "entropies": {wid: float(h) for wid, h in sorted(entropies.items())},
            "strong_labels": state.strong_total,
            "weak_labels": state.weak_total,
            "done": state.done(),
        }

    @app.get("/graph")
    def get_graph() -> dict:
        return _snapshot(state)

    @app.get("/curve")
    def get_curve() -> dict:
        return {"version": API_VERSION, "points": [{
            "round": pt.round_index,
            "seen": pt.seen,
            "strong_labels": pt.strong_total,
            "weak_labels": pt.weak_total,
            "accuracy": pt.accuracy,
        } for pt in state.curve]}

    return app

import pytest
from fastapi.testclient import TestClient

from ctxal.harness.service import API_VERSION, create_app
from ctxal.harness.session import SessionConfig, SessionState
from ctxal.harness.synth import GeneratorConfig, generate_dataset
from ctxal.mlr import TeacherConfig


def make_client(n=120, batch=20, k_absolute=5, oracle=False, mode="strong_only",
                strategy="caqs"):
    dataset = generate_dataset(GeneratorConfig(instance_count=n, seed=5))
    config = SessionConfig(
        batch_size=batch, strategy=strategy,
        teacher=TeacherConfig(mode=mode, k_absolute=k_absolute))
    state = SessionState(dataset, config)
    app = create_app(state, oracle=oracle)
    return TestClient(app), state, dataset


class TestSessionEndpoint:
    def test_reports_state(self):
        client, state, dataset = make_client()
        info = client.get("/session").json()
        assert info["version"] == API_VERSION
        assert info["round"] == 0
        assert info["seen"] == state.pointer
        assert info["total"] == len(dataset)
        assert info["class_count"] == 8
        assert info["strategy"] == "caqs"
        assert info["mode"] == "strong_only"
        assert info["pending"] is False
        assert info["done"] is False

    def test_create_app_bootstraps(self):
        _, state, _ = make_client()
        assert state.pointer > 0


class TestQueries:
    def test_proposes_on_demand_and_is_idempotent(self):
        client, _, _ = make_client()
        first = client.get("/queries").json()
        assert first["done"] is False
        assert len(first["queries"]) == 5
        entropies = [q["entropy"] for q in first["queries"]]
        assert entropies == sorted(entropies, reverse=True)
        for q in first["queries"]:
            assert len(q["marginal"]) == 8
        second = client.get("/queries").json()
        assert [q["id"] for q in second["queries"]] == \
            [q["id"] for q in first["queries"]]

    def test_abort_allows_reproposal(self):
        client, state, _ = make_client()
        assert client.delete("/queries").status_code == 409
        ids = {q["id"] for q in client.get("/queries").json()["queries"]}
        resp = client.delete("/queries")
        assert resp.status_code == 200
        assert resp.json()["aborted"] is True
        assert state.pending is None
        again = {q["id"] for q in client.get("/queries").json()["queries"]}
        assert again == ids  # same window, same model state


class TestLabels:
    def test_requires_pending_round(self):
        client, _, _ = make_client()
        assert client.post("/labels", json={"labels": {}}).status_code == 409

    def test_manual_labels_advance_round(self):
        client, _, dataset = make_client()
        truth = dataset.labels()
        queries = client.get("/queries").json()["queries"]
        resp = client.post("/labels", json={
            "labels": {q["id"]: truth[q["id"]] for q in queries}})
        assert resp.status_code == 200
        body = resp.json()
        assert body["round"] == 1
        for q in queries:
            assert body["entropies"][q["id"]] < 1e-9
        assert body["strong_labels"] > 0

    def test_rejects_malformed_bodies(self):
        client, _, dataset = make_client()
        client.get("/queries")
        assert client.post("/labels", json={}).status_code == 400
        assert client.post("/labels",
                           json={"labels": "nope"}).status_code == 400
        assert client.post("/labels",
                           json={"labels": {"ev000000": "x"}}).status_code == 400

    def test_rejects_wrong_ids(self):
        client, _, _ = make_client()
        ids = [q["id"] for q in client.get("/queries").json()["queries"]]
        labels = {qid: 0 for qid in ids[:-1]}
        labels["ev999999"] = 0
        resp = client.post("/labels", json={"labels": labels})
        assert resp.status_code == 400
        assert "missing" in resp.json()["detail"]

    def test_auto_needs_oracle_mode(self):
        client, _, _ = make_client(oracle=False)
        client.get("/queries")
        assert client.post("/labels", json={"auto": True}).status_code == 400

    def test_auto_mode_drives_to_done(self):
        client, _, _ = make_client(n=80, oracle=True)
        last = None
        for _ in range(20):
            queries = client.get("/queries").json()
            if queries["done"]:
                break
            last = client.post("/labels", json={"auto": True}).json()
        assert last is not None and last["done"] is True
        info = client.get("/session").json()
        assert info["done"] is True
        assert info["seen"] == 80


class TestGraphAndCurve:
    def test_graph_snapshot_pending(self):
        client, _, _ = make_client()
        queried = {q["id"] for q in client.get("/queries").json()["queries"]}
        graph = client.get("/graph").json()
        assert graph["pending"] is True
        assert len(graph["nodes"]) == 20
        flagged = {n["id"] for n in graph["nodes"] if n["queried"]}
        assert flagged == queried
        for node in graph["nodes"]:
            assert len(node["marginal"]) == 8

    def test_graph_snapshot_after_round(self):
        client, _, dataset = make_client()
        truth = dataset.labels()
        queries = client.get("/queries").json()["queries"]
        client.post("/labels", json={
            "labels": {q["id"]: truth[q["id"]] for q in queries}})
        graph = client.get("/graph").json()
        assert graph["pending"] is False
        assert len(graph["nodes"]) == 20
        assert all(n["marginal"] is None for n in graph["nodes"])

    def test_curve_grows_by_round(self):
        client, _, dataset = make_client()
        truth = dataset.labels()
        assert client.get("/curve").json()["points"] == []
        queries = client.get("/queries").json()["queries"]
        client.post("/labels", json={
            "labels": {q["id"]: truth[q["id"]] for q in queries}})
        points = client.get("/curve").json()["points"]
        assert len(points) == 1
        assert points[0]["round"] == 1
        assert points[0]["strong_labels"] > 0


class TestMutualInformationPayloads:
    def test_queries_list_strongest_neighbors_first(self):
        client, state, _ = make_client()
        queries = client.get("/queries").json()["queries"]
        window = set(state.pending["window_ids"])
        saw_any = False
        for q in queries:
            values = [n["mi"] for n in q["neighbors"]]
            assert values == sorted(values, reverse=True)
            for n in q["neighbors"]:
                assert n["id"] in window and n["id"] != q["id"]
                assert n["mi"] > 0.0
            saw_any = saw_any or bool(values)
        assert saw_any

    def test_graph_edges_match_query_neighbors(self):
        client, _, _ = make_client()
        queries = client.get("/queries").json()["queries"]
        graph = client.get("/graph").json()
        assert graph["edges"]
        pairs = set()
        for e in graph["edges"]:
            assert e["source"] < e["target"]
            assert e["mi"] > 0.0
            pairs.add((e["source"], e["target"]))
        assert len(pairs) == len(graph["edges"])
        for q in queries:
            for n in q["neighbors"]:
                assert tuple(sorted((q["id"], n["id"]))) in pairs

    def test_no_context_strategy_reports_no_interactions(self):
        client, _, _ = make_client(strategy="caqs_no_context")
        queries = client.get("/queries").json()["queries"]
        assert queries
        assert all(q["neighbors"] == [] for q in queries)
        assert client.get("/graph").json()["edges"] == []

    def test_edges_cleared_after_round(self):
        client, _, dataset = make_client()
        truth = dataset.labels()
        queries = client.get("/queries").json()["queries"]
        client.post("/labels", json={
            "labels": {q["id"]: truth[q["id"]] for q in queries}})
        assert client.get("/graph").json()["edges"] == []


class TestAcceptanceShapedFlow:
    """Paused round, fetch 5, answer 5, verify the advance end to end."""

    def test_label_five_round_trip(self):
        client, state, dataset = make_client(k_absolute=5, oracle=True)
        round_before = client.get("/session").json()["round"]
        queries = client.get("/queries").json()["queries"]
        assert len(queries) == 5
        truth = dataset.labels()
        resp = client.post("/labels", json={
            "labels": {q["id"]: truth[q["id"]] for q in queries}}).json()
        assert resp["round"] == round_before + 1
        labeled = [resp["entropies"][q["id"]] for q in queries]
        assert all(h < 1e-9 for h in labeled)
        assert len(client.get("/curve").json()["points"]) == 1

import pytest
from fastapi.testclient import TestClient

from docrag.service import (
    AppState,
    build_engine,
    build_registry,
    create_app,
    load_config,
)


@pytest.fixture
def app_state(demo_config):
    config = load_config(demo_config)
    engine, manifest = build_engine(config)
    return AppState(engine=engine, corpus_version=manifest.version_tag)


@pytest.fixture
def client(app_state):
    return TestClient(create_app(app_state))


class TestConfig:
    def test_paths_resolved_relative_to_config(self, demo_config):
        config = load_config(demo_config)
        assert config.manifest.is_absolute()
        assert config.manifest.exists()
        assert config.data_dir == demo_config.parent / "data"

    def test_missing_manifest_rejected(self, tmp_path):
        bad = tmp_path / "config.yaml"
        bad.write_text("manifest: nowhere.txt\n", encoding="utf-8")
        with pytest.raises(FileNotFoundError):
            load_config(bad)

    def test_tool_specs_parsed(self, demo_config):
        config = load_config(demo_config)
        assert [t.name for t in config.tools] == ["docs", "discussions"]
        assert config.default_tool == "docs"


class TestNotReady:
    def test_health_reports_building(self):
        client = TestClient(create_app(AppState()))
        payload = client.get("/health").json()
        assert payload["status"] == "building"
        assert payload["kb_sizes"] == {}

    def test_everything_else_is_503(self):
        client = TestClient(create_app(AppState()))
        assert client.post("/threads", json={"title": "t"}).status_code == 503
        assert client.get("/threads").status_code == 503
        assert client.post("/retrieve", json={"query": "q"}).status_code == 503


class TestHealth:
    def test_ready_health(self, client):
        payload = client.get("/health").json()
        assert payload["status"] == "ok"
        assert payload["corpus_version"] == "v1.0"
        assert set(payload["kb_sizes"]) == {"docs", "discussions"}
        assert all(size > 0 for size in payload["kb_sizes"].values())


class TestThreads:
    def test_create_returns_201_and_id(self, client):
        resp = client.post("/threads", json={"title": "My thread"})
        assert resp.status_code == 201
        assert resp.json()["thread_id"]

    def test_round_trip(self, client):
        tid = client.post("/threads", json={"title": "My thread"}).json()["thread_id"]
        thread = client.get(f"/threads/{tid}").json()
        assert thread["thread_id"] == tid
        assert thread["title"] == "My thread"
        assert thread["turns"] == []
        listing = client.get("/threads").json()
        assert any(t["thread_id"] == tid for t in listing)

    def test_unknown_thread_404(self, client):
        assert client.get("/threads/nope").status_code == 404
        assert client.post("/threads/nope/messages", json={"question": "q"}).status_code == 404

    def test_empty_question_422(self, client):
        tid = client.post("/threads", json={"title": "t"}).json()["thread_id"]
        resp = client.post(f"/threads/{tid}/messages", json={"question": "   "})
        assert resp.status_code == 422


class TestMessages:
    def test_answer_end_to_end(self, client):
        tid = client.post("/threads", json={"title": "t"}).json()["thread_id"]
        resp = client.post(f"/threads/{tid}/messages",
                           json={"question": "clock tree synthesis skew"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["answer"].strip()
        assert body["latency"] > 0
        assert body["tools_used"]
        corpus_urls = {
            "https://docs.example.com/getting_started",
            "https://docs.example.com/commands",
            "https://forum.example.com/i1",
            "https://forum.example.com/d1",
        }
        assert {c["url"] for c in body["citations"]} <= corpus_urls

    def test_turn_persisted(self, client):
        tid = client.post("/threads", json={"title": "t"}).json()["thread_id"]
        client.post(f"/threads/{tid}/messages", json={"question": "global routing command"})
        thread = client.get(f"/threads/{tid}").json()
        assert len(thread["turns"]) == 1
        assert thread["turns"][0]["question"] == "global routing command"


class TestRetrieveDebug:
    def test_default_tool_results(self, client):
        body = client.post("/retrieve", json={"query": "clock tree skew"}).json()
        assert body["tool"] == "docs"
        assert 1 <= len(body["top_k"]) <= 3
        first = body["top_k"][0]
        assert {"chunk_id", "doc_id", "text", "score", "channel", "source_url"} <= set(first)
        assert body["citations"]

    def test_explicit_tool(self, client):
        body = client.post("/retrieve",
                           json={"query": "cmake build fails", "tool": "discussions"}).json()
        assert body["tool"] == "discussions"
        assert all(sc["source_url"].startswith("https://forum.example.com")
                   for sc in body["top_k"])

    def test_unknown_tool_404(self, client):
        resp = client.post("/retrieve", json={"query": "q", "tool": "bogus"})
        assert resp.status_code == 404

    def test_empty_query_422(self, client):
        assert client.post("/retrieve", json={"query": " "}).status_code == 422


class TestSnapshotCache:
    def test_snapshots_written_and_reused(self, demo_config):
        config = load_config(demo_config)
        embedder = None
        from docrag.llm import HashEmbedder

        embedder = HashEmbedder(dim=16)
        registry1, _ = build_registry(config, embedder)
        snapshots = sorted((config.data_dir / "snapshots").glob("*.kb"))
        assert len(snapshots) == 2
        mtimes = [p.stat().st_mtime_ns for p in snapshots]

        counting = HashEmbedder(dim=16)
        registry2, _ = build_registry(config, counting)
        assert counting.call_count == 0  # loaded from snapshots, no embedding
        assert [p.stat().st_mtime_ns for p in sorted(
            (config.data_dir / "snapshots").glob("*.kb"))] == mtimes
        for name in registry1.names():
            assert set(registry2.get(name).kb.chunks) == set(registry1.get(name).kb.chunks)

    def test_cache_disabled_rebuilds(self, demo_config):
        from docrag.llm import HashEmbedder

        config = load_config(demo_config)
        config.use_snapshot_cache = False
        embedder = HashEmbedder(dim=16)
        build_registry(config, embedder)
        assert embedder.call_count > 0
        assert not (config.data_dir / "snapshots").exists()

"""HTTP service: threads, messages, retrieval debugging, health.

Handlers are pure serializations of conversation-module outputs; all
business logic lives below this layer. Indexes are built (or loaded from a
snapshot cache keyed by manifest hash + embedder id) before the app is
marked ready; requests arriving earlier get 503.
"""

import dataclasses
import hashlib
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path

import yaml
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import llm
from .conversation import ConversationEngine, ThreadNotFound, ThreadStore
from .corpus import CorpusManifest, SourceDocument, load_manifest, parse_discussion_jsonl
from .index import KnowledgeBase, build_knowledge_base, load_knowledge_base, save_knowledge_base
from .ingest import chunk_discussion, chunk_document, default_policies
from .retrieve import RetrievalConfig, hybrid_retrieve
from .tools import RetrieverTool, ToolRegistry

logger = logging.getLogger(__name__)


@dataclass
class ToolSpec:
    name: str
    description: str
    tags: list[str]
    overrides: dict = field(default_factory=dict)


@dataclass
class ServiceConfig:
    manifest: Path
    data_dir: Path
    host: str = "127.0.0.1"
    port: int = 8080
    max_chunk_chars: int = 2000
    retrieval: dict = field(default_factory=dict)
    providers: dict = field(default_factory=dict)
    tools: list[ToolSpec] = field(default_factory=list)
    default_tool: str | None = None
    max_tools: int = 2
    cors_origins: list[str] = field(default_factory=list)
    use_snapshot_cache: bool = True


def load_config(path) -> ServiceConfig:
    path = Path(path)
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    base = path.parent
    listen = raw.get("listen", {})
    config = ServiceConfig(
        manifest=(base / raw["manifest"]).resolve(),
        data_dir=(base / raw.get("data_dir", "data")).resolve(),
        host=listen.get("host", "127.0.0.1"),
        port=int(listen.get("port", 8080)),
        max_chunk_chars=int(raw.get("max_chunk_chars", 2000)),
        retrieval=raw.get("retrieval", {}),
        providers=raw.get("providers", {}),
        tools=[ToolSpec(**t) for t in raw.get("tools", [])],
        default_tool=raw.get("default_tool"),
        max_tools=int(raw.get("max_tools", 2)),
        cors_origins=list(raw.get("cors_origins", [])),
        use_snapshot_cache=bool(raw.get("use_snapshot_cache", True)),
    )
    if not config.manifest.exists():
        raise FileNotFoundError(f"manifest not found: {config.manifest}")
    return config


def _provider_from(spec: dict, name: str):
    return llm.build_provider(llm.ProviderConfig(
        name=name,
        kind=spec["kind"],
        endpoint=spec.get("endpoint", ""),
        model=spec.get("model", ""),
        credential_env=spec.get("credential_env", ""),
        batch_limit=int(spec.get("batch_limit", 100)),
        extra={k: v for k, v in spec.items()
               if k not in ("kind", "endpoint", "model", "credential_env", "batch_limit")},
    ))


def _embedder_id(spec: dict) -> str:
    return f"{spec.get('kind', '?')}:{spec.get('model', '')}:{spec.get('dim', '')}"


def load_corpus_chunks(manifest: CorpusManifest, manifest_path: Path, max_chunk_chars: int):
    """Read every manifest entry and chunk it; returns tag -> chunk list."""
    policies = default_policies(max_chunk_chars)
    by_tag: dict[str, list] = {}
    base = manifest_path.parent
    for entry in manifest.entries:
        source = Path(entry.path)
        if not source.is_absolute():
            source = base / source
        if entry.format == "discussion":
            chunks = []
            for rec in parse_discussion_jsonl(source):
                if not rec.url:
                    rec.url = entry.url
                if not rec.tagged:
                    logger.warning("skipping untagged discussion record %s", rec.id)
                    continue
                chunks.extend(chunk_discussion(rec, max_chunk_chars))
        else:
            doc = SourceDocument(
                id=source.stem,
                format=entry.format,
                title=source.stem.replace("_", " "),
                url=entry.url,
                body=source.read_text(encoding="utf-8"),
                version_tag=manifest.version_tag,
            )
            chunks = chunk_document(doc, policies[entry.format])
        for tag in entry.knowledge_base_tags:
            by_tag.setdefault(tag, []).extend(chunks)
    return by_tag


def build_registry(config: ServiceConfig, embedder) -> tuple[ToolRegistry, CorpusManifest]:
    manifest = load_manifest(config.manifest)
    by_tag = load_corpus_chunks(manifest, config.manifest, config.max_chunk_chars)
    embedder_id = _embedder_id(config.providers.get("embed", {}))
    cache_key_base = hashlib.sha256(
        config.manifest.read_bytes() + embedder_id.encode()
    ).hexdigest()[:16]
    snapshot_dir = config.data_dir / "snapshots"
    registry = ToolRegistry(default_tool=config.default_tool)
    for spec in config.tools:
        chunks, seen = [], set()
        for tag in spec.tags:
            for chunk in by_tag.get(tag, []):
                if chunk.chunk_id not in seen:
                    seen.add(chunk.chunk_id)
                    chunks.append(chunk)
        if not chunks:
            logger.warning("tool %r matched no chunks; skipped", spec.name)
            continue
        snapshot = snapshot_dir / f"{spec.name}-{cache_key_base}.kb"
        kb: KnowledgeBase | None = None
        if config.use_snapshot_cache and snapshot.exists():
            try:
                kb = load_knowledge_base(snapshot, expected_embedder_id=embedder_id)
            except Exception as exc:
                logger.warning("snapshot %s unusable (%s); rebuilding", snapshot, exc)
        if kb is None:
            kb = build_knowledge_base(spec.name, chunks, embedder)
            if config.use_snapshot_cache:
                snapshot_dir.mkdir(parents=True, exist_ok=True)
                save_knowledge_base(kb, snapshot, embedder_id)
        retrieval = {**config.retrieval, **spec.overrides}
        registry.register(RetrieverTool(
            name=spec.name,
            description=spec.description,
            kb=kb,
            config=RetrievalConfig(**retrieval),
        ))
    return registry, manifest


def build_engine(config: ServiceConfig) -> tuple[ConversationEngine, CorpusManifest]:
    chat = _provider_from(config.providers.get("chat", {"kind": "extractive-chat"}), "chat")
    embedder = _provider_from(config.providers.get("embed", {"kind": "hash-embedder"}), "embed")
    rerank_spec = config.providers.get("rerank")
    reranker = _provider_from(rerank_spec, "rerank") if rerank_spec else None
    registry, manifest = build_registry(config, embedder)
    store = ThreadStore(config.data_dir / "threads")
    engine = ConversationEngine(
        store, registry, chat, embedder, reranker, max_tools=config.max_tools
    )
    return engine, manifest


class AppState:
    def __init__(self, engine: ConversationEngine | None = None, corpus_version: str = ""):
        self.engine = engine
        self.corpus_version = corpus_version
        self.ready = engine is not None


class CreateThreadBody(BaseModel):
    title: str = "New thread"


class MessageBody(BaseModel):
    question: str


class RetrieveBody(BaseModel):
    query: str
    tool: str | None = None


def create_app(state: AppState, cors_origins: list[str] | None = None) -> FastAPI:
    app = FastAPI(title="docrag")
    if cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def engine() -> ConversationEngine:
        if not state.ready or state.engine is None:
            raise HTTPException(status_code=503, detail="indexes are still building")
        return state.engine

    @app.get("/health")
    def health():
        sizes = {}
        if state.ready and state.engine is not None:
            registry = state.engine.registry
            sizes = {name: len(registry.get(name).kb) for name in registry.names()}
        return {
            "status": "ok" if state.ready else "building",
            "corpus_version": state.corpus_version,
            "kb_sizes": sizes,
        }

    @app.post("/threads", status_code=201)
    def create_thread(body: CreateThreadBody):
        thread = engine().create_thread(body.title)
        return {"thread_id": thread.thread_id}

    @app.get("/threads")
    def list_threads():
        return engine().list_threads()

    @app.get("/threads/{thread_id}")
    def get_thread(thread_id: str):
        try:
            thread = engine().get_thread(thread_id)
        except ThreadNotFound:
            raise HTTPException(status_code=404, detail="unknown thread")
        return dataclasses.asdict(thread)

    @app.post("/threads/{thread_id}/messages")
    def post_message(thread_id: str, body: MessageBody):
        if not body.question.strip():
            raise HTTPException(status_code=422, detail="question is empty")
        try:
            response = engine().answer(thread_id, body.question)
        except ThreadNotFound:
            raise HTTPException(status_code=404, detail="unknown thread")
        return dataclasses.asdict(response)

    @app.post("/retrieve")
    def retrieve_debug(body: RetrieveBody):
        if not body.query.strip():
            raise HTTPException(status_code=422, detail="query is empty")
        eng = engine()
        registry = eng.registry
        tool_name = body.tool or registry.default_tool
        if tool_name not in registry:
            raise HTTPException(status_code=404, detail=f"unknown tool {tool_name!r}")
        tool = registry.get(tool_name)
        result = hybrid_retrieve(tool.kb, body.query, eng.embedder, eng.reranker, tool.config)
        return {
            "query": result.query,
            "k": result.k,
            "tool": tool_name,
            "top_k": [
                {
                    "chunk_id": sc.chunk.chunk_id,
                    "doc_id": sc.chunk.doc_id,
                    "text": sc.chunk.text,
                    "score": sc.score,
                    "channel": sc.channel,
                    "source_url": sc.chunk.source_url,
                }
                for sc in result.top_k
            ],
            "citations": result.citations,
            "degraded": result.degraded,
            "degraded_reasons": result.degraded_reasons,
        }

    return app


def serve(config: ServiceConfig):
    """Build indexes, then serve; readiness flips once the engine exists."""
    import uvicorn

    state = AppState()
    app = create_app(state, config.cors_origins)

    def build():
        engine, manifest = build_engine(config)
        state.engine = engine
        state.corpus_version = manifest.version_tag
        state.ready = True
        logger.info("indexes ready (corpus %s)", manifest.version_tag)

    threading.Thread(target=build, daemon=True).start()
    uvicorn.run(app, host=config.host, port=config.port)

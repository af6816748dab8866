"""Two-stage conversation pipeline with persistent threads.

A turn runs: history-aware query rephrasing (first chat call, skipped when
the thread has no history), LLM tool routing (second chat call), retrieval
through the selected tools, then grounded answer generation (third chat
call) whose prompt contains only the retrieved chunk texts plus the
rephrased query. Citations are attached programmatically from retrieval
metadata, never parsed out of the model's text, so a response can never
cite a link that was not retrieved.
"""

import dataclasses
import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from . import llm, prompts
from .retrieve import RetrievalResult
from .tools import ToolRegistry, invoke_tools, select_tools

logger = logging.getLogger(__name__)

DEFAULT_HISTORY_WINDOW = 6

NOT_FOUND_ANSWER = (
    "I could not find relevant documentation for this question in the indexed "
    "sources, so I won't guess. Could you rephrase it or name the tool or "
    "feature you are asking about?"
)


class ThreadNotFound(KeyError):
    pass


@dataclass
class TurnPair:
    question: str
    rephrased_question: str
    answer: str
    citations: list[str] = field(default_factory=list)
    tools_used: list[str] = field(default_factory=list)
    degraded: bool = False
    latency: float = 0.0


@dataclass
class Thread:
    thread_id: str
    title: str
    turns: list[TurnPair] = field(default_factory=list)
    created_at: float = 0.0
    updated_at: float = 0.0


@dataclass
class Citation:
    url: str
    title: str


@dataclass
class AssistantResponse:
    answer: str
    citations: list[Citation]
    tools_used: list[str]
    retrieval: dict
    degraded: bool
    latency: float


class ThreadStore:
    """Append-only on-disk thread log: one directory per thread holding
    meta.json plus one JSON record per turn, written via write-then-rename."""

    def __init__(self, base_dir):
        self.base_dir = Path(base_dir)
        self.base_dir.mkdir(parents=True, exist_ok=True)

    def _dir(self, thread_id: str) -> Path:
        return self.base_dir / thread_id

    def _write_json(self, path: Path, payload: dict) -> None:
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8")
        tmp.replace(path)

    def create(self, title: str) -> Thread:
        thread_id = uuid.uuid4().hex[:12]
        now = time.time()
        thread = Thread(thread_id=thread_id, title=title, created_at=now, updated_at=now)
        d = self._dir(thread_id)
        d.mkdir(parents=True)
        self._write_json(d / "meta.json", {
            "thread_id": thread_id, "title": title, "created_at": now, "updated_at": now,
        })
        return thread

    def get(self, thread_id: str) -> Thread:
        d = self._dir(thread_id)
        meta_path = d / "meta.json"
        if not meta_path.exists():
            raise ThreadNotFound(thread_id)
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        turns = []
        for turn_path in sorted(d.glob("turn-*.json")):
            turns.append(TurnPair(**json.loads(turn_path.read_text(encoding="utf-8"))))
        return Thread(
            thread_id=meta["thread_id"],
            title=meta["title"],
            turns=turns,
            created_at=meta["created_at"],
            updated_at=meta["updated_at"],
        )

    def list(self) -> list[dict]:
        """Thread summaries, newest activity first."""
        summaries = []
        for meta_path in self.base_dir.glob("*/meta.json"):
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            meta["turn_count"] = len(list(meta_path.parent.glob("turn-*.json")))
            summaries.append(meta)
        return sorted(summaries, key=lambda m: -m["updated_at"])

    def append_turn(self, thread_id: str, turn: TurnPair) -> None:
        d = self._dir(thread_id)
        if not (d / "meta.json").exists():
            raise ThreadNotFound(thread_id)
        ordinal = len(list(d.glob("turn-*.json")))
        self._write_json(d / f"turn-{ordinal:06d}.json", dataclasses.asdict(turn))
        meta = json.loads((d / "meta.json").read_text(encoding="utf-8"))
        meta["updated_at"] = time.time()
        self._write_json(d / "meta.json", meta)


def rephrase_query(
    history: list[TurnPair],
    question: str,
    chat,
    history_window: int = DEFAULT_HISTORY_WINDOW,
) -> tuple[str, bool]:
    """Rewrite a follow-up into a standalone question using recent turns.

    Returns (rephrased, degraded). With no history only whitespace is
    normalized and no provider call is made. On provider failure the raw
    question is kept and the turn is flagged degraded.
    """
    question = " ".join(question.split())
    if not question:
        raise ValueError("question is empty")
    if not history:
        return question, False
    recent = history[-history_window:]
    lines = []
    for turn in recent:
        lines.append(f"User: {turn.question}")
        lines.append(f"Assistant: {turn.answer}")
    prompt = "Conversation so far:\n" + "\n".join(lines) + f"\n\nNew question: {question}"
    try:
        resp = llm.complete(chat, llm.user_request(prompts.load("rephrase"), prompt))
    except llm.ProviderError as exc:
        logger.warning("rephrase call failed (%s); using raw question", exc)
        return question, True
    rephrased = " ".join(resp.content.split())
    return (rephrased or question), not rephrased


def _generation_prompt(result: RetrievalResult, rephrased: str) -> str:
    blocks = []
    for i, sc in enumerate(result.top_k, start=1):
        blocks.append(f"[context {i}] (source: {sc.chunk.source_url})\n{sc.chunk.text}")
    return "\n\n".join(blocks) + f"\n\nQuestion: {rephrased}"


class ConversationEngine:
    """Owns the per-turn pipeline over a thread store, tool registry and
    providers. Turns within one thread are serialized; distinct threads
    proceed concurrently."""

    def __init__(
        self,
        store: ThreadStore,
        registry: ToolRegistry,
        chat,
        embedder,
        reranker=None,
        history_window: int = DEFAULT_HISTORY_WINDOW,
        max_tools: int = 2,
        answer_temperature: float = 0.2,
    ):
        self.store = store
        self.registry = registry
        self.chat = chat
        self.embedder = embedder
        self.reranker = reranker
        self.history_window = history_window
        self.max_tools = max_tools
        self.answer_temperature = answer_temperature
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, thread_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(thread_id, threading.Lock())

    def create_thread(self, title: str) -> Thread:
        return self.store.create(title)

    def get_thread(self, thread_id: str) -> Thread:
        return self.store.get(thread_id)

    def list_threads(self) -> list[dict]:
        return self.store.list()

    def answer(self, thread_id: str, question: str) -> AssistantResponse:
        with self._lock_for(thread_id):
            return self._answer_locked(thread_id, question)

    def _answer_locked(self, thread_id: str, question: str) -> AssistantResponse:
        start = time.perf_counter()
        thread = self.store.get(thread_id)  # raises ThreadNotFound
        rephrased, degraded = rephrase_query(
            thread.turns, question, self.chat, self.history_window
        )
        selection = select_tools(self.registry, rephrased, self.chat, self.max_tools)
        result = invoke_tools(selection, self.registry, rephrased, self.embedder, self.reranker)
        degraded = degraded or selection.fallback or result.degraded

        if not result.top_k:
            answer_text = NOT_FOUND_ANSWER
            citations: list[Citation] = []
        else:
            req = llm.ChatRequest(
                system_prompt=prompts.load("generation"),
                messages=[llm.Message("user", _generation_prompt(result, rephrased))],
                temperature=self.answer_temperature,
            )
            answer_text = llm.complete(self.chat, req).content
            titles = {sc.chunk.source_url: sc.chunk.doc_id for sc in result.top_k}
            citations = [Citation(url=url, title=titles[url]) for url in result.citations]

        latency = time.perf_counter() - start
        turn = TurnPair(
            question=" ".join(question.split()),
            rephrased_question=rephrased,
            answer=answer_text,
            citations=[c.url for c in citations],
            tools_used=list(selection.chosen),
            degraded=degraded,
            latency=latency,
        )
        # Append only after the whole pipeline succeeded: a provider error
        # above leaves the thread untouched.
        self.store.append_turn(thread_id, turn)
        return AssistantResponse(
            answer=answer_text,
            citations=citations,
            tools_used=list(selection.chosen),
            retrieval={
                "k": result.k,
                "chunk_ids": result.chunk_ids,
                "scores": [sc.score for sc in result.top_k],
                "degraded_reasons": result.degraded_reasons,
            },
            degraded=degraded,
            latency=latency,
        )

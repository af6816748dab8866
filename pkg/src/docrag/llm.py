"""Provider abstraction for chat, embeddings and rerank scoring.

Concrete providers are thin HTTP clients configured by name; scripted
mocks give deterministic, provider-free test runs. All call sites go
through the module-level helpers (`complete`, `embed`, `rerank_score`)
which own the retry policy.
"""

import hashlib
import logging
import os
import re
import time
from dataclasses import dataclass, field

import numpy as np
import requests

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0
RETRY_BACKOFF = (1.0, 2.0)


class ProviderError(Exception):
    """Transient provider failure; eligible for retry."""


class ProviderAuthError(Exception):
    """Credential/configuration problem; never retried."""


class MockScriptExhausted(Exception):
    """A scripted mock ran out of queued replies."""


@dataclass
class Message:
    role: str  # "user" | "assistant"
    content: str


@dataclass
class ChatRequest:
    system_prompt: str
    messages: list[Message]
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self):
        if not self.messages:
            raise ValueError("ChatRequest requires at least one message")
        for i, msg in enumerate(self.messages):
            expected = "user" if i % 2 == 0 else "assistant"
            if msg.role != expected:
                raise ValueError(
                    f"messages must alternate user/assistant starting with user "
                    f"(position {i} is {msg.role!r})"
                )


@dataclass
class ChatResponse:
    content: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency: float = 0.0


def user_request(system_prompt: str, text: str, **kwargs) -> ChatRequest:
    """Single user-turn request, the common case for routing/judging calls."""
    return ChatRequest(system_prompt=system_prompt, messages=[Message("user", text)], **kwargs)


def complete(provider, req: ChatRequest, retries: int = 2, backoff=RETRY_BACKOFF) -> ChatResponse:
    """Run a chat completion with retry on transient failures.

    Auth errors propagate immediately; transient errors are retried
    `retries` times with backoff, then re-raised as ProviderError.
    """
    last_exc = None
    for attempt in range(retries + 1):
        start = time.perf_counter()
        try:
            resp = provider.complete(req)
            resp.latency = max(resp.latency, time.perf_counter() - start)
            return resp
        except ProviderAuthError:
            raise
        except ProviderError as exc:
            last_exc = exc
            if attempt < retries:
                delay = backoff[min(attempt, len(backoff) - 1)]
                logger.warning("chat call failed (%s), retrying in %.1fs", exc, delay)
                time.sleep(delay)
    raise ProviderError(f"chat provider failed after {retries + 1} attempts: {last_exc}")


def embed(provider, texts: list[str], retries: int = 2, backoff=RETRY_BACKOFF) -> list[np.ndarray]:
    """Embed texts, batching per the provider's limit; one vector per text."""
    if not texts:
        raise ValueError("embed requires at least one text")
    limit = getattr(provider, "batch_limit", None) or len(texts)
    vectors: list[np.ndarray] = []
    for start in range(0, len(texts), limit):
        batch = texts[start : start + limit]
        last_exc = None
        for attempt in range(retries + 1):
            try:
                vectors.extend(np.asarray(v, dtype=np.float64) for v in provider.embed(batch))
                break
            except ProviderAuthError:
                raise
            except ProviderError as exc:
                last_exc = exc
                if attempt < retries:
                    time.sleep(backoff[min(attempt, len(backoff) - 1)])
        else:
            raise ProviderError(f"embedding provider failed after {retries + 1} attempts: {last_exc}")
    dims = {v.shape[0] for v in vectors}
    if len(dims) != 1:
        raise ProviderError(f"inconsistent embedding dims across batch: {sorted(dims)}")
    return vectors


def rerank_score(provider, query: str, texts: list[str], retries: int = 2, backoff=RETRY_BACKOFF) -> list[float]:
    """Score (query, text) relevance per text; higher means more relevant."""
    if not texts:
        raise ValueError("rerank_score requires at least one text")
    last_exc = None
    for attempt in range(retries + 1):
        try:
            scores = [float(s) for s in provider.rerank(query, texts)]
            if len(scores) != len(texts) or not all(np.isfinite(scores)):
                raise ProviderError("reranker returned malformed scores")
            return scores
        except ProviderAuthError:
            raise
        except ProviderError as exc:
            last_exc = exc
            if attempt < retries:
                time.sleep(backoff[min(attempt, len(backoff) - 1)])
    raise ProviderError(f"rerank provider failed after {retries + 1} attempts: {last_exc}")


# --------------------------------------------------------------------------
# Scripted mocks (deterministic test doubles)
# --------------------------------------------------------------------------


class ScriptedChatProvider:
    """Replays queued replies in order; fails loudly when the queue empties.

    Queue items may be strings (returned as content) or exceptions
    (raised), which lets tests script transient-failure sequences.
    """

    def __init__(self, replies=None, delay: float = 0.0):
        self.replies = list(replies or [])
        self.delay = delay
        self.calls: list[ChatRequest] = []

    def push(self, *replies):
        self.replies.extend(replies)

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def complete(self, req: ChatRequest) -> ChatResponse:
        self.calls.append(req)
        if not self.replies:
            raise MockScriptExhausted(
                f"scripted chat provider exhausted after {len(self.calls)} calls"
            )
        item = self.replies.pop(0)
        if self.delay:
            time.sleep(self.delay)
        if isinstance(item, Exception):
            raise item
        return ChatResponse(content=str(item), completion_tokens=len(str(item).split()))


class HashEmbedder:
    """Deterministic pseudo-random unit vectors seeded by text content."""

    def __init__(self, dim: int = 32, batch_limit: int | None = None):
        self.dim = dim
        self.batch_limit = batch_limit
        self.call_count = 0

    def _vector(self, text: str) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        self.call_count += 1
        return [self._vector(t) for t in texts]


_WORD_RE = re.compile(r"[a-z0-9]+")


class LexicalReranker:
    """Query-term coverage scorer: fraction of distinct query terms in text."""

    def rerank(self, query: str, texts: list[str]) -> list[float]:
        terms = {t for t in _WORD_RE.findall(query.lower()) if len(t) >= 2}
        if not terms:
            return [0.0] * len(texts)
        scores = []
        for text in texts:
            present = {t for t in _WORD_RE.findall(text.lower()) if len(t) >= 2}
            scores.append(len(terms & present) / len(terms))
        return scores


class ExtractiveChatProvider:
    """Offline chat provider that answers by quoting supplied context.

    Useful for demo/integration runs with no live model: it extracts the
    first context block from the prompt, or echoes the question when no
    context is present.
    """

    def __init__(self):
        self.calls: list[ChatRequest] = []

    def complete(self, req: ChatRequest) -> ChatResponse:
        self.calls.append(req)
        text = req.messages[-1].content
        m = re.search(r"\[context \d+\][^\n]*\n(.+?)(?:\n\n|\Z)", text, re.DOTALL)
        if m:
            content = m.group(1).strip()
        else:
            content = text.strip().splitlines()[-1] if text.strip() else ""
        return ChatResponse(content=content, completion_tokens=len(content.split()))


# --------------------------------------------------------------------------
# HTTP providers (OpenAI-compatible wire shapes)
# --------------------------------------------------------------------------


@dataclass
class ProviderConfig:
    name: str
    kind: str  # chat | embed | rerank | builtin mock kinds
    endpoint: str = ""
    model: str = ""
    credential_env: str = ""
    batch_limit: int = 100
    extra: dict = field(default_factory=dict)


def _api_key(config: ProviderConfig) -> str:
    if not config.credential_env:
        return ""
    key = os.environ.get(config.credential_env, "")
    if not key:
        raise ProviderAuthError(
            f"credential env var {config.credential_env!r} not set for provider {config.name!r}"
        )
    return key


class HttpChatProvider:
    def __init__(self, config: ProviderConfig, timeout: float = DEFAULT_TIMEOUT):
        self.config = config
        self.timeout = timeout

    def complete(self, req: ChatRequest) -> ChatResponse:
        key = _api_key(self.config)
        messages = [{"role": "system", "content": req.system_prompt}]
        messages += [{"role": m.role, "content": m.content} for m in req.messages]
        payload = {
            "model": self.config.model,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        try:
            r = requests.post(
                self.config.endpoint,
                json=payload,
                headers={"Authorization": f"Bearer {key}"} if key else {},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ProviderError(f"chat request failed: {exc}") from exc
        if r.status_code in (401, 403):
            raise ProviderAuthError(f"provider {self.config.name!r} rejected credentials")
        if r.status_code >= 400:
            raise ProviderError(f"provider {self.config.name!r} returned {r.status_code}")
        body = r.json()
        choice = body["choices"][0]["message"]["content"]
        usage = body.get("usage", {})
        return ChatResponse(
            content=choice,
            prompt_tokens=usage.get("prompt_tokens", 0),
            completion_tokens=usage.get("completion_tokens", 0),
        )


class HttpEmbedProvider:
    def __init__(self, config: ProviderConfig, timeout: float = DEFAULT_TIMEOUT):
        self.config = config
        self.timeout = timeout
        self.batch_limit = config.batch_limit

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        key = _api_key(self.config)
        try:
            r = requests.post(
                self.config.endpoint,
                json={"model": self.config.model, "input": texts},
                headers={"Authorization": f"Bearer {key}"} if key else {},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ProviderError(f"embed request failed: {exc}") from exc
        if r.status_code in (401, 403):
            raise ProviderAuthError(f"provider {self.config.name!r} rejected credentials")
        if r.status_code >= 400:
            raise ProviderError(f"provider {self.config.name!r} returned {r.status_code}")
        return [np.asarray(item["embedding"], dtype=np.float64) for item in r.json()["data"]]


def build_provider(config: ProviderConfig):
    """Construct a provider from config; mock kinds need no network."""
    if config.kind == "chat":
        return HttpChatProvider(config)
    if config.kind == "embed":
        return HttpEmbedProvider(config)
    if config.kind == "hash-embedder":
        return HashEmbedder(dim=int(config.extra.get("dim", 32)))
    if config.kind == "lexical-reranker":
        return LexicalReranker()
    if config.kind == "extractive-chat":
        return ExtractiveChatProvider()
    raise ValueError(f"unknown provider kind {config.kind!r}")

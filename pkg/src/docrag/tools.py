"""Named retriever tools over knowledge-base subsets, with LLM routing.

A registry holds one tool per domain (general docs, commands, installation,
errors, ...). The router prompt presents each tool's name and description;
the routing LLM's reply is parsed into registered names. Tool names beyond
the routing reply are never invented: unknown names are dropped, and an
empty selection falls back to the broadest tool.
"""

import logging
from dataclasses import dataclass, field

from . import llm, prompts
from .index import KnowledgeBase
from .retrieve import RetrievalConfig, RetrievalResult, ScoredChunk, citations_of, hybrid_retrieve

logger = logging.getLogger(__name__)

DEFAULT_MAX_TOOLS = 2


class RoutingError(Exception):
    pass


@dataclass
class RetrieverTool:
    name: str
    description: str
    kb: KnowledgeBase
    config: RetrievalConfig = field(default_factory=RetrievalConfig)

    def __post_init__(self):
        if not self.description:
            raise ValueError(f"tool {self.name!r} needs a routing description")


@dataclass
class ToolSelection:
    chosen: list[str]
    rationale: str = ""
    fallback: bool = False


class ToolRegistry:
    """Immutable-after-startup name -> tool map."""

    def __init__(self, default_tool: str | None = None):
        self._tools: dict[str, RetrieverTool] = {}
        self._default = default_tool

    def register(self, tool: RetrieverTool) -> None:
        if tool.name in self._tools:
            raise ValueError(f"tool {tool.name!r} already registered")
        self._tools[tool.name] = tool

    def get(self, name: str) -> RetrieverTool:
        return self._tools[name]

    def names(self) -> list[str]:
        return list(self._tools)

    def __len__(self) -> int:
        return len(self._tools)

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    @property
    def default_tool(self) -> str:
        """Explicitly configured default, else the broadest knowledge base."""
        if self._default is not None:
            return self._default
        if not self._tools:
            raise RoutingError("registry is empty")
        return max(self._tools.values(), key=lambda t: (len(t.kb), t.name)).name


def register_tool(registry: ToolRegistry, tool: RetrieverTool) -> ToolRegistry:
    registry.register(tool)
    return registry


def _parse_selection(reply: str, registry: ToolRegistry) -> list[str]:
    line = reply.strip().splitlines()[0] if reply.strip() else ""
    names = []
    for raw in line.replace(";", ",").split(","):
        name = raw.strip().strip("\"'`.")
        if not name:
            continue
        if name in registry:
            if name not in names:
                names.append(name)
        else:
            logger.warning("router named unknown tool %r; dropped", name)
    return names


def select_tools(
    registry: ToolRegistry,
    rephrased_query: str,
    chat,
    max_tools: int = DEFAULT_MAX_TOOLS,
    retries: int = 2,
) -> ToolSelection:
    """Route a query to registered tools via the routing prompt.

    An unparseable or fully-unknown reply is retried; after retries the
    default tool is used and the selection is flagged as a fallback.
    """
    if len(registry) == 0:
        raise RoutingError("cannot route with an empty tool registry")
    listing = "\n".join(
        f"- {name}: {registry.get(name).description}" for name in registry.names()
    )
    system = prompts.load("routing").format(tools=listing, max_tools=max_tools)
    rationale = ""
    for _ in range(retries + 1):
        try:
            resp = llm.complete(chat, llm.user_request(system, rephrased_query))
        except llm.ProviderError as exc:
            logger.warning("routing call failed (%s)", exc)
            break
        rationale = resp.content.strip()
        names = _parse_selection(resp.content, registry)
        if names:
            return ToolSelection(chosen=names[:max_tools], rationale=rationale)
    logger.warning("routing produced no usable tool names; using default tool")
    return ToolSelection(chosen=[registry.default_tool], rationale=rationale, fallback=True)


def invoke_tools(
    selection: ToolSelection,
    registry: ToolRegistry,
    query: str,
    embedder,
    reranker=None,
    k: int | None = None,
) -> RetrievalResult:
    """Run hybrid retrieval per chosen tool and merge by rank interleaving.

    Interleaving (t1[0], t2[0], t1[1], t2[1], ...) is used instead of score
    mixing because per-tool reranker scores are not calibrated against each
    other. Duplicates keep their first (best-ranked) occurrence. Final size
    is capped at the global k (default: the largest k among chosen tools).
    """
    if not selection.chosen:
        raise RoutingError("selection has no tools")
    tools = [registry.get(name) for name in selection.chosen]
    if k is None:
        k = max(t.config.k for t in tools)
    per_tool: list[RetrievalResult] = []
    for tool in tools:
        if len(tool.kb) == 0:
            logger.warning("tool %r has an empty knowledge base; skipped", tool.name)
            continue
        per_tool.append(hybrid_retrieve(tool.kb, query, embedder, reranker, tool.config))
    merged: list[ScoredChunk] = []
    seen: set[str] = set()
    depth = max((len(r.top_k) for r in per_tool), default=0)
    for rank in range(depth):
        for result in per_tool:
            if rank >= len(result.top_k) or len(merged) >= k:
                continue
            sc = result.top_k[rank]
            if sc.chunk.chunk_id not in seen:
                seen.add(sc.chunk.chunk_id)
                merged.append(sc)
    merged = merged[:k]
    degraded_reasons = [r for result in per_tool for r in result.degraded_reasons]
    return RetrievalResult(
        query=query,
        top_k=merged,
        k=k,
        citations=citations_of(merged),
        degraded=any(r.degraded for r in per_tool),
        degraded_reasons=degraded_reasons,
    )

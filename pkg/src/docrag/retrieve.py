"""Hybrid retrieval pipeline: similarity search, MMR search, BM25 search,
weighted reciprocal-rank fusion, reranking, top-k selection.

The three channels run over the same knowledge base and are merged with
rank-based fusion because cosine and BM25 scores live on incomparable
scales. A raw-score weighted sum over min-max normalized scores is kept as
a config alternative.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import llm
from .corpus import Chunk
from .index import KnowledgeBase, bm25_all_scores, cosine_similarity, tokenize

logger = logging.getLogger(__name__)

DEFAULT_RRF_K = 60.0

CHANNELS = ("similarity", "mmr", "bm25")


@dataclass(frozen=True)
class ScoredChunk:
    chunk: Chunk
    score: float
    channel: str  # similarity | mmr | bm25 | fused | reranked


@dataclass
class RetrievalResult:
    query: str
    top_k: list[ScoredChunk]
    k: int
    citations: list[str] = field(default_factory=list)
    degraded: bool = False
    degraded_reasons: list[str] = field(default_factory=list)

    @property
    def chunk_ids(self) -> list[str]:
        return [sc.chunk.chunk_id for sc in self.top_k]


@dataclass
class RetrievalConfig:
    k: int = 5
    similarity_n: int = 10
    mmr_n: int = 10
    mmr_pool: int = 30
    mmr_lambda: float = 0.7
    bm25_n: int = 10
    fused_candidates: int = 20
    rrf_k: float = DEFAULT_RRF_K
    weights: dict[str, float] = field(default_factory=lambda: {c: 1.0 for c in CHANNELS})
    fusion_scheme: str = "rrf"  # rrf | weighted_sum

    def __post_init__(self):
        if not 0.0 <= self.mmr_lambda <= 1.0:
            raise ValueError("mmr_lambda must be in [0, 1]")
        if self.mmr_pool < self.mmr_n:
            raise ValueError("mmr_pool must be >= mmr_n")


def citations_of(scored: list[ScoredChunk]) -> list[str]:
    """Distinct source urls in rank order."""
    seen: set[str] = set()
    urls: list[str] = []
    for sc in scored:
        url = sc.chunk.source_url
        if url not in seen:
            seen.add(url)
            urls.append(url)
    return urls


def _ranked(pairs: list[tuple[str, float]], n: int) -> list[tuple[str, float]]:
    """Sort by score descending, chunk_id ascending as the tiebreak."""
    return sorted(pairs, key=lambda p: (-p[1], p[0]))[:n]


def similarity_search(kb: KnowledgeBase, query_vec: np.ndarray, n: int) -> list[ScoredChunk]:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not kb.chunks:
        return []
    scores = [
        (cid, cosine_similarity(query_vec, vec)) for cid, vec in kb.vector_index.vectors.items()
    ]
    return [ScoredChunk(kb.chunks[cid], s, "similarity") for cid, s in _ranked(scores, n)]


def mmr_search(
    kb: KnowledgeBase,
    query_vec: np.ndarray,
    n: int,
    lam: float = 0.7,
    pool: int = 30,
) -> list[ScoredChunk]:
    """Greedy maximal-marginal-relevance selection over the top-`pool`
    similarity candidates: each step picks
    argmax lam*sim(query, c) - (1-lam)*max_selected sim(c, s)."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0, 1]")
    if pool < n:
        raise ValueError("pool must be >= n")
    candidates = similarity_search(kb, query_vec, pool)
    if not candidates:
        return []
    relevance = {sc.chunk.chunk_id: sc.score for sc in candidates}
    remaining = [sc.chunk.chunk_id for sc in candidates]  # already rank-ordered
    selected: list[str] = []
    out: list[ScoredChunk] = []
    while remaining and len(selected) < n:
        best_id, best_score = None, -np.inf
        for cid in remaining:
            redundancy = 0.0
            if selected:
                redundancy = max(
                    cosine_similarity(kb.vector_index.vectors[cid], kb.vector_index.vectors[sid])
                    for sid in selected
                )
            score = lam * relevance[cid] - (1.0 - lam) * redundancy
            # Strict > keeps the tiebreak on similarity rank order.
            if score > best_score:
                best_id, best_score = cid, score
        selected.append(best_id)
        remaining.remove(best_id)
        out.append(ScoredChunk(kb.chunks[best_id], best_score, "mmr"))
    return out


def bm25_search(kb: KnowledgeBase, query: str, n: int) -> list[ScoredChunk]:
    """Top-n by BM25 over the tokenized query; zero-scoring chunks excluded."""
    if n < 1:
        raise ValueError("n must be >= 1")
    terms = tokenize(query)
    scores = [(cid, s) for cid, s in bm25_all_scores(kb.bm25_index, terms).items() if s > 0.0]
    return [ScoredChunk(kb.chunks[cid], s, "bm25") for cid, s in _ranked(scores, n)]


def fuse(
    channels: dict[str, list[ScoredChunk]],
    weights: dict[str, float] | None = None,
    rrf_k: float = DEFAULT_RRF_K,
    scheme: str = "rrf",
) -> list[ScoredChunk]:
    """Merge ranked channel outputs into one deduplicated descending list.

    rrf: fused(c) = sum over channels containing c of weight / (rrf_k + rank),
    rank 1-based. weighted_sum: min-max normalize each channel's scores then
    sum weight * normalized score.
    """
    if weights is None:
        weights = {name: 1.0 for name in channels}
    if any(w < 0 for w in weights.values()):
        raise ValueError("channel weights must be >= 0")
    if channels and not any(weights.get(name, 0.0) > 0 for name in channels):
        raise ValueError("at least one channel weight must be positive")
    fused: dict[str, float] = {}
    chunks: dict[str, Chunk] = {}
    for name, ranked in channels.items():
        w = weights.get(name, 0.0)
        if not ranked or w == 0.0:
            continue
        if scheme == "rrf":
            contribs = [w / (rrf_k + rank) for rank in range(1, len(ranked) + 1)]
        elif scheme == "weighted_sum":
            lo = min(sc.score for sc in ranked)
            hi = max(sc.score for sc in ranked)
            span = hi - lo
            contribs = [w * ((sc.score - lo) / span if span > 0 else 1.0) for sc in ranked]
        else:
            raise ValueError(f"unknown fusion scheme {scheme!r}")
        for sc, contrib in zip(ranked, contribs):
            cid = sc.chunk.chunk_id
            fused[cid] = fused.get(cid, 0.0) + contrib
            chunks[cid] = sc.chunk
    ordered = _ranked(list(fused.items()), len(fused))
    return [ScoredChunk(chunks[cid], s, "fused") for cid, s in ordered]


def rerank(query: str, candidates: list[ScoredChunk], reranker, k: int) -> RetrievalResult:
    """Reorder candidates by provider relevance scores and cut to top-k.

    Reranker failure is never user-facing: the fused order is kept and the
    result is flagged degraded.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    degraded_reasons: list[str] = []
    if not candidates:
        return RetrievalResult(query=query, top_k=[], k=k)
    if reranker is None:
        top = [replace(sc, channel="reranked") for sc in candidates[:k]]
        degraded_reasons.append("no reranker configured; fused order kept")
    else:
        try:
            scores = llm.rerank_score(reranker, query, [sc.chunk.text for sc in candidates])
            ranked = _ranked(
                [(sc.chunk.chunk_id, s) for sc, s in zip(candidates, scores)], k
            )
            by_id = {sc.chunk.chunk_id: sc.chunk for sc in candidates}
            top = [ScoredChunk(by_id[cid], s, "reranked") for cid, s in ranked]
        except llm.ProviderError as exc:
            logger.warning("reranker failed (%s); falling back to fused order", exc)
            top = [replace(sc, channel="reranked") for sc in candidates[:k]]
            degraded_reasons.append(f"reranker unavailable: {exc}")
    return RetrievalResult(
        query=query,
        top_k=top,
        k=k,
        citations=citations_of(top),
        degraded=bool(degraded_reasons),
        degraded_reasons=degraded_reasons,
    )


def hybrid_retrieve(
    kb: KnowledgeBase,
    query: str,
    embedder,
    reranker=None,
    config: RetrievalConfig | None = None,
) -> RetrievalResult:
    """Full pipeline: embed -> {similarity, mmr, bm25} -> fuse -> rerank.

    Embedding failure degrades to BM25-only retrieval rather than failing.
    """
    config = config or RetrievalConfig()
    channels: dict[str, list[ScoredChunk]] = {}
    degraded_reasons: list[str] = []
    try:
        query_vec = llm.embed(embedder, [query])[0]
        channels["similarity"] = similarity_search(kb, query_vec, config.similarity_n)
        channels["mmr"] = mmr_search(
            kb, query_vec, config.mmr_n, lam=config.mmr_lambda, pool=config.mmr_pool
        )
    except llm.ProviderError as exc:
        logger.warning("embedding failed (%s); degrading to BM25-only retrieval", exc)
        degraded_reasons.append(f"vector channels unavailable: {exc}")
    channels["bm25"] = bm25_search(kb, query, config.bm25_n)
    fused = fuse(channels, config.weights, rrf_k=config.rrf_k, scheme=config.fusion_scheme)
    result = rerank(query, fused[: config.fused_candidates], reranker, config.k)
    if degraded_reasons:
        result.degraded = True
        result.degraded_reasons = degraded_reasons + result.degraded_reasons
    return result

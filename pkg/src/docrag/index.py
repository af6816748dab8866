"""Dual knowledge-base representation: exact-search dense vector index and
Okapi BM25 inverted index over the same chunk set, with a single-file
binary snapshot format.

Exact (flat) nearest-neighbor search is deliberate: at documentation-corpus
scale (thousands of chunks) it is fast, deterministic, and removes the ANN
recall/latency tradeoff entirely.
"""

import math
import pickle
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Chunk
from . import llm

MAGIC = b"DOCRAGKB"
SNAPSHOT_VERSION = 1

DEFAULT_K1 = 1.5
DEFAULT_B = 0.75

# Lowercase alphanumeric runs of length >= 2, no stemming. Command names
# like "global_route" split into stable subtokens ("global", "route")
# consistently at index and query time.
_TOKEN_RE = re.compile(r"[a-z0-9]+")


class IndexBuildError(Exception):
    """Index build or snapshot failure."""


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 2]


@dataclass
class VectorIndex:
    vectors: dict[str, np.ndarray]
    dim: int

    def __post_init__(self):
        for cid, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise IndexBuildError(f"vector for {cid!r} has dim {vec.shape}, expected ({self.dim},)")
            if not np.all(np.isfinite(vec)):
                raise IndexBuildError(f"vector for {cid!r} has non-finite components")


@dataclass
class Bm25Index:
    postings: dict[str, list[tuple[str, int]]]  # term -> [(chunk_id, tf)]
    doc_lengths: dict[str, int]
    avg_doc_len: float
    doc_count: int
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B


@dataclass
class KnowledgeBase:
    name: str
    vector_index: VectorIndex
    bm25_index: Bm25Index
    chunks: dict[str, Chunk]

    def __post_init__(self):
        keys = set(self.chunks)
        if set(self.vector_index.vectors) != keys or set(self.bm25_index.doc_lengths) != keys:
            raise IndexBuildError(
                f"knowledge base {self.name!r}: vector, bm25 and chunk key sets differ"
            )

    def __len__(self) -> int:
        return len(self.chunks)


def embed_chunks(chunks: list[Chunk], embedder) -> VectorIndex:
    """Embed every chunk; the provider's retry policy is applied per batch."""
    if not chunks:
        raise IndexBuildError("cannot embed an empty chunk list")
    try:
        vectors = llm.embed(embedder, [c.text for c in chunks])
    except llm.ProviderError as exc:
        ids = ", ".join(c.chunk_id for c in chunks[:5])
        raise IndexBuildError(f"embedding failed for chunks starting at [{ids}]: {exc}") from exc
    dim = vectors[0].shape[0]
    return VectorIndex(vectors={c.chunk_id: v for c, v in zip(chunks, vectors)}, dim=dim)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dim mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for zero-norm vectors")
    return float(np.dot(a, b) / (na * nb))


def build_bm25(chunks: list[Chunk], k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> Bm25Index:
    if not chunks:
        raise IndexBuildError("cannot build BM25 over an empty chunk list")
    postings: dict[str, dict[str, int]] = {}
    doc_lengths: dict[str, int] = {}
    for chunk in chunks:
        tokens = tokenize(chunk.text)
        doc_lengths[chunk.chunk_id] = len(tokens)
        for term in tokens:
            postings.setdefault(term, {})
            postings[term][chunk.chunk_id] = postings[term].get(chunk.chunk_id, 0) + 1
    avg = sum(doc_lengths.values()) / len(doc_lengths)
    return Bm25Index(
        postings={t: sorted(freqs.items()) for t, freqs in postings.items()},
        doc_lengths=doc_lengths,
        avg_doc_len=avg,
        doc_count=len(doc_lengths),
        k1=k1,
        b=b,
    )


def _idf(index: Bm25Index, term: str) -> float:
    df = len(index.postings.get(term, ()))
    # The +1 inside the log keeps IDF positive even for ubiquitous terms.
    return math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))


def bm25_score(index: Bm25Index, query_terms: list[str], chunk_id: str) -> float:
    """Okapi BM25 score of one chunk against tokenized query terms."""
    if chunk_id not in index.doc_lengths:
        raise KeyError(f"unknown chunk id {chunk_id!r}")
    length = index.doc_lengths[chunk_id]
    score = 0.0
    for term in query_terms:
        tf = 0
        for cid, freq in index.postings.get(term, ()):
            if cid == chunk_id:
                tf = freq
                break
        if tf == 0:
            continue
        norm = index.k1 * (1.0 - index.b + index.b * length / index.avg_doc_len)
        score += _idf(index, term) * tf * (index.k1 + 1.0) / (tf + norm)
    return score


def bm25_all_scores(index: Bm25Index, query_terms: list[str]) -> dict[str, float]:
    """Accumulate scores for every chunk touching any query term (one pass
    over postings; equivalent to bm25_score per chunk)."""
    scores: dict[str, float] = {}
    for term in set(query_terms):
        mult = query_terms.count(term)
        idf = _idf(index, term)
        for cid, tf in index.postings.get(term, ()):
            length = index.doc_lengths[cid]
            norm = index.k1 * (1.0 - index.b + index.b * length / index.avg_doc_len)
            scores[cid] = scores.get(cid, 0.0) + mult * idf * tf * (index.k1 + 1.0) / (tf + norm)
    return scores


def build_knowledge_base(
    name: str,
    chunks: list[Chunk],
    embedder,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> KnowledgeBase:
    return KnowledgeBase(
        name=name,
        vector_index=embed_chunks(chunks, embedder),
        bm25_index=build_bm25(chunks, k1=k1, b=b),
        chunks={c.chunk_id: c for c in chunks},
    )


def save_knowledge_base(kb: KnowledgeBase, path, embedder_id: str) -> None:
    """Single-file binary snapshot: magic, format version, embedder id, dim,
    then the pickled payload."""
    path = Path(path)
    header = f"{SNAPSHOT_VERSION}\n{embedder_id}\n{kb.vector_index.dim}\n".encode("utf-8")
    payload = pickle.dumps(
        {
            "name": kb.name,
            "vectors": kb.vector_index.vectors,
            "dim": kb.vector_index.dim,
            "bm25": kb.bm25_index,
            "chunks": kb.chunks,
        },
        protocol=pickle.HIGHEST_PROTOCOL,
    )
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(4, "big"))
        fh.write(header)
        fh.write(payload)
    tmp.replace(path)


def load_knowledge_base(path, expected_embedder_id: str | None = None) -> KnowledgeBase:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise IndexBuildError(f"{path}: not a knowledge base snapshot (bad magic)")
        header_len = int.from_bytes(fh.read(4), "big")
        try:
            version_s, embedder_id, _dim = fh.read(header_len).decode("utf-8").splitlines()
        except ValueError as exc:
            raise IndexBuildError(f"{path}: corrupt snapshot header") from exc
        if int(version_s) != SNAPSHOT_VERSION:
            raise IndexBuildError(
                f"{path}: snapshot format version {version_s} != {SNAPSHOT_VERSION}"
            )
        if expected_embedder_id is not None and embedder_id != expected_embedder_id:
            raise IndexBuildError(
                f"{path}: snapshot built with embedder {embedder_id!r}, "
                f"expected {expected_embedder_id!r}"
            )
        try:
            data = pickle.load(fh)
        except Exception as exc:
            raise IndexBuildError(f"{path}: corrupt snapshot payload: {exc}") from exc
    return KnowledgeBase(
        name=data["name"],
        vector_index=VectorIndex(vectors=data["vectors"], dim=data["dim"]),
        bm25_index=data["bm25"],
        chunks=data["chunks"],
    )

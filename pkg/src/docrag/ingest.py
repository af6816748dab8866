"""Chunking by format-specific delimiters and LLM tagging of discussions.

Splitting is recursive: try the coarsest delimiter first, and only
subdivide pieces that still exceed the character cap with the next, finer
delimiter. Pieces that fit are kept whole, so a short document always
yields a single chunk.
"""

import dataclasses
import logging
import re
from dataclasses import dataclass, field

from . import prompts
from .corpus import CATEGORIES, Chunk, DiscussionRecord, SourceDocument
from .llm import user_request, complete

logger = logging.getLogger(__name__)

DEFAULT_MAX_CHUNK_CHARS = 2000

# Ordered coarse -> fine. Heading patterns use a lookahead so the marker
# stays attached to the following piece and reconstruction loses nothing
# but whitespace.
MARKDOWN_DELIMITERS = (r"(?m)(?=^#{1,6} )", r"\n\s*\n", r"(?<=[.!?])\s+")
PLAINTEXT_DELIMITERS = (r"\n\s*\n", r"(?<=[.!?])\s+")


class TaggingError(Exception):
    """The tagging LLM produced no parseable reply after retries."""


@dataclass
class ChunkingPolicy:
    format: str
    delimiters: tuple[str, ...]
    max_chunk_chars: int = DEFAULT_MAX_CHUNK_CHARS
    overlap_chars: int = 0

    def __post_init__(self):
        if not self.delimiters:
            raise ValueError(f"chunking policy for {self.format!r} needs delimiters")
        if self.overlap_chars >= self.max_chunk_chars:
            raise ValueError("overlap_chars must be smaller than max_chunk_chars")


def default_policies(max_chunk_chars: int = DEFAULT_MAX_CHUNK_CHARS) -> dict[str, ChunkingPolicy]:
    return {
        "markdown": ChunkingPolicy("markdown", MARKDOWN_DELIMITERS, max_chunk_chars),
        "html": ChunkingPolicy("html", PLAINTEXT_DELIMITERS, max_chunk_chars),
        "plaintext": ChunkingPolicy("plaintext", PLAINTEXT_DELIMITERS, max_chunk_chars),
        "discussion": ChunkingPolicy("discussion", PLAINTEXT_DELIMITERS, max_chunk_chars),
    }


_TAG_RE = re.compile(r"<[^>]+>")
_LINK_RE = re.compile(r'<a\s[^>]*href="([^"]+)"[^>]*>(.*?)</a>', re.IGNORECASE | re.DOTALL)
_BLOCK_RE = re.compile(r"</?(p|div|section|article|h[1-6]|li|ul|ol|table|tr|br)\b[^>]*>", re.IGNORECASE)


def strip_html(html: str) -> str:
    """Flatten HTML to text: block tags become blank lines, links become
    "text (url)" so citation targets survive, all other tags are dropped."""
    text = _LINK_RE.sub(lambda m: f"{m.group(2).strip()} ({m.group(1)})", html)
    text = _BLOCK_RE.sub("\n\n", text)
    text = _TAG_RE.sub(" ", text)
    return text


def _hard_split(piece: str, cap: int) -> list[str]:
    """Whitespace packing; tokens longer than the cap are cut at cap width."""
    out: list[str] = []
    current = ""
    for token in piece.split():
        if len(token) > cap:
            logger.warning("hard-splitting a %d-char token (cap %d)", len(token), cap)
            if current:
                out.append(current)
                current = ""
            out.extend(token[i : i + cap] for i in range(0, len(token), cap))
            continue
        candidate = f"{current} {token}" if current else token
        if len(candidate) > cap:
            out.append(current)
            current = token
        else:
            current = candidate
    if current:
        out.append(current)
    return out


def _split_recursive(text: str, delimiters: tuple[str, ...], cap: int) -> list[str]:
    stripped = text.strip()
    if not stripped:
        return []
    if len(stripped) <= cap:
        return [stripped]
    if not delimiters:
        return _hard_split(stripped, cap)
    parts = [p for p in re.split(delimiters[0], text) if p.strip()]
    if len(parts) <= 1:
        return _split_recursive(text, delimiters[1:], cap)
    pieces: list[str] = []
    for part in parts:
        part = part.strip()
        if len(part) <= cap:
            pieces.append(part)
        else:
            pieces.extend(_split_recursive(part, delimiters[1:], cap))
    return pieces


def _apply_overlap(pieces: list[str], overlap: int) -> list[str]:
    if overlap <= 0 or len(pieces) < 2:
        return pieces
    out = [pieces[0]]
    for prev, cur in zip(pieces, pieces[1:]):
        out.append(prev[-overlap:] + " " + cur)
    return out


def chunk_document(doc: SourceDocument, policy: ChunkingPolicy) -> list[Chunk]:
    """Split a document into chunks at the coarsest delimiter that keeps
    each piece under the cap, recursing to finer delimiters as needed."""
    if policy.format != doc.format:
        raise ValueError(
            f"policy format {policy.format!r} does not match document format {doc.format!r}"
        )
    body = strip_html(doc.body) if doc.format == "html" else doc.body
    if not body.strip():
        raise ValueError(f"document {doc.id!r} has an empty body after normalization")
    pieces = _split_recursive(body, policy.delimiters, policy.max_chunk_chars)
    pieces = _apply_overlap(pieces, policy.overlap_chars)
    return [
        Chunk(
            chunk_id=f"{doc.id}:{i}",
            doc_id=doc.id,
            text=piece,
            ordinal=i,
            source_url=doc.url,
        )
        for i, piece in enumerate(pieces)
    ]


def chunk_discussion(rec: DiscussionRecord, max_chunk_chars: int = DEFAULT_MAX_CHUNK_CHARS) -> list[Chunk]:
    """One chunk for title+body, then comments packed greedily into groups
    under the cap; oversized single comments fall back to recursive split."""
    if not rec.tagged:
        raise ValueError(f"record {rec.id!r} must be tagged before chunking")
    pieces: list[str] = []
    head = f"{rec.title}\n\n{rec.body}".strip()
    pieces.extend(_split_recursive(head, PLAINTEXT_DELIMITERS, max_chunk_chars))
    group = ""
    for comment in rec.comments:
        comment = comment.strip()
        if not comment:
            continue
        candidate = f"{group}\n\n{comment}" if group else comment
        if len(candidate) <= max_chunk_chars:
            group = candidate
            continue
        if group:
            pieces.append(group)
            group = ""
        if len(comment) <= max_chunk_chars:
            group = comment
        else:
            pieces.extend(_split_recursive(comment, PLAINTEXT_DELIMITERS, max_chunk_chars))
    if group:
        pieces.append(group)
    return [
        Chunk(
            chunk_id=f"{rec.id}:{i}",
            doc_id=rec.id,
            text=piece,
            ordinal=i,
            source_url=rec.url,
        )
        for i, piece in enumerate(pieces)
    ]


def _render_record(rec: DiscussionRecord, max_chars: int = 4000) -> str:
    text = f"Title: {rec.title}\n\n{rec.body}"
    for comment in rec.comments:
        text += f"\n\n---\n{comment}"
    return text[:max_chars]


def _parse_tag_reply(reply: str) -> tuple[str, str, list[str]]:
    line = reply.strip().splitlines()[0] if reply.strip() else ""
    fields = [f.strip() for f in line.split("|")]
    if len(fields) != 3 or not fields[0] or not fields[1]:
        raise ValueError(f"unparseable tag reply: {reply!r}")
    tools = [t.strip() for t in fields[2].split(",") if t.strip()]
    return fields[0], fields[1], tools


def tag_discussion(rec: DiscussionRecord, llm, retries: int = 2) -> DiscussionRecord:
    """Populate category/subcategory/referenced_tools via the tagging prompt.

    Idempotent: an already-tagged record is returned unchanged without any
    provider call. Off-vocabulary categories are coerced to "Query".
    """
    if rec.tagged:
        return rec
    system = prompts.load("tagging").format(categories=", ".join(CATEGORIES))
    last_exc: Exception | None = None
    for _ in range(retries + 1):
        resp = complete(llm, user_request(system, _render_record(rec)))
        try:
            category, subcategory, tools = _parse_tag_reply(resp.content)
        except ValueError as exc:
            last_exc = exc
            continue
        if category not in CATEGORIES:
            logger.warning(
                "record %s: off-vocabulary category %r coerced to Query", rec.id, category
            )
            category = "Query"
        return dataclasses.replace(
            rec, category=category, subcategory=subcategory, referenced_tools=tools
        )
    raise TaggingError(f"record {rec.id!r}: {last_exc}")

"""Document and chunk data model, corpus manifest, discussion JSONL schema."""

import json
from dataclasses import dataclass, field
from pathlib import Path

FORMATS = ("markdown", "html", "plaintext", "discussion")

# Closed category vocabulary for tagged discussions.
CATEGORIES = (
    "Bug",
    "Feature request",
    "Runtime",
    "Build",
    "Query",
    "Installation",
    "Documentation",
    "Configuration",
)

DISCUSSION_KINDS = ("issue", "discussion")


class ManifestError(ValueError):
    """Manifest file failed to parse or validate."""


class JsonlError(ValueError):
    """Discussion JSONL file failed to parse or validate."""


@dataclass(frozen=True)
class SourceDocument:
    id: str
    format: str
    title: str
    url: str
    body: str
    version_tag: str = "unversioned"

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValueError(f"unknown document format {self.format!r}")
        if not self.url:
            raise ValueError(f"document {self.id!r} has no url (citations require one)")
        if not self.body:
            raise ValueError(f"document {self.id!r} has an empty body")


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    text: str
    ordinal: int
    source_url: str

    def __post_init__(self):
        if not self.text:
            raise ValueError(f"chunk {self.chunk_id!r} has empty text")
        if self.ordinal < 0:
            raise ValueError(f"chunk {self.chunk_id!r} has negative ordinal")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    format: str
    url: str
    knowledge_base_tags: tuple[str, ...]


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[ManifestEntry, ...]
    version_tag: str = "unversioned"


@dataclass
class DiscussionRecord:
    id: str
    kind: str
    title: str
    body: str
    comments: list[str] = field(default_factory=list)
    url: str = ""
    category: str = ""
    subcategory: str = ""
    referenced_tools: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in DISCUSSION_KINDS:
            raise ValueError(f"record {self.id!r}: unknown kind {self.kind!r}")

    @property
    def tagged(self) -> bool:
        # referenced_tools may legitimately be empty; category and
        # subcategory must both be populated for a record to count as tagged.
        return bool(self.category) and bool(self.subcategory)


def _is_absolute_url(url: str) -> bool:
    return url.startswith("http://") or url.startswith("https://") or url.startswith("file://")


def load_manifest(path) -> CorpusManifest:
    """Load a line-oriented corpus manifest.

    Format: UTF-8 text; `#` starts a comment; a line `version <tag>` sets
    the snapshot label; every other non-blank line is one source entry of
    tab-separated fields: path, format, url, tags (comma-separated).
    """
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    entries = []
    version_tag = "unversioned"
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("version "):
            version_tag = line.split(None, 1)[1].strip()
            continue
        fields = [f.strip() for f in line.split("\t") if f.strip()]
        if len(fields) != 4:
            raise ManifestError(
                f"{path}:{lineno}: expected 4 tab-separated fields "
                f"(path, format, url, tags), got {len(fields)}"
            )
        entry_path, fmt, url, tags = fields
        if fmt not in FORMATS:
            raise ManifestError(f"{path}:{lineno}: unknown format {fmt!r} for {entry_path!r}")
        if not _is_absolute_url(url):
            raise ManifestError(f"{path}:{lineno}: url must be absolute, got {url!r}")
        tag_list = tuple(t.strip() for t in tags.split(",") if t.strip())
        if not tag_list:
            raise ManifestError(f"{path}:{lineno}: entry {entry_path!r} has no knowledge base tags")
        entries.append(ManifestEntry(entry_path, fmt, url, tag_list))
    return CorpusManifest(entries=tuple(entries), version_tag=version_tag)


def parse_discussion_jsonl(path) -> list[DiscussionRecord]:
    """Parse one DiscussionRecord per line, in file order.

    Untagged records are admitted with empty tag fields (tagging happens
    downstream). Malformed lines and duplicate ids are hard errors.
    """
    path = Path(path)
    if not path.exists():
        raise JsonlError(f"discussion file not found: {path}")
    records: list[DiscussionRecord] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise JsonlError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            try:
                rec = DiscussionRecord(
                    id=str(obj["id"]),
                    kind=obj["kind"],
                    title=obj.get("title", ""),
                    body=obj.get("body", ""),
                    comments=list(obj.get("comments", [])),
                    url=obj.get("url", ""),
                    category=obj.get("category", ""),
                    subcategory=obj.get("subcategory", ""),
                    referenced_tools=list(obj.get("referenced_tools", [])),
                )
            except (KeyError, ValueError) as exc:
                raise JsonlError(f"{path}:{lineno}: {exc}") from exc
            if rec.id in seen:
                raise JsonlError(f"{path}:{lineno}: duplicate record id {rec.id!r}")
            seen.add(rec.id)
            records.append(rec)
    return records


def category_distribution(records: list[DiscussionRecord]) -> dict[str, dict[str, float]]:
    """Per-kind category percentages, sorted descending by issue share.

    Returns {category: {kind: percent}} where percentages within each kind
    sum to 100 (up to rounding). All records must be tagged.
    """
    if not records:
        raise ValueError("empty dataset")
    for rec in records:
        if not rec.tagged:
            raise ValueError(f"record {rec.id!r} is untagged")
    totals = {kind: 0 for kind in DISCUSSION_KINDS}
    counts: dict[str, dict[str, int]] = {}
    for rec in records:
        totals[rec.kind] += 1
        counts.setdefault(rec.category, {k: 0 for k in DISCUSSION_KINDS})[rec.kind] += 1
    table = {}
    for category, per_kind in counts.items():
        table[category] = {
            kind: 100.0 * per_kind[kind] / totals[kind]
            for kind in DISCUSSION_KINDS
            if totals[kind] > 0
        }
    ordered = sorted(table.items(), key=lambda kv: (-kv[1].get("issue", 0.0), kv[0]))
    return dict(ordered)

import json

import pytest

from docrag.corpus import Chunk
from docrag.index import build_knowledge_base
from docrag.llm import HashEmbedder, LexicalReranker


def make_chunks(texts, doc_id="doc", url="https://example.com/doc"):
    return [
        Chunk(chunk_id=f"{doc_id}:{i}", doc_id=doc_id, text=t, ordinal=i, source_url=url)
        for i, t in enumerate(texts)
    ]


@pytest.fixture
def embedder():
    return HashEmbedder(dim=16)


@pytest.fixture
def reranker():
    return LexicalReranker()


def pytest_terminal_summary(terminalreporter):
    """Surface the acceptance suite's one-line-per-criterion results."""
    try:
        from test_acceptance import PASS_LINES
    except ImportError:
        return
    if PASS_LINES:
        terminalreporter.section("acceptance criteria")
        for line in PASS_LINES:
            terminalreporter.write_line(line)


def write_demo_workspace(root):
    """Lay out a tiny but complete corpus workspace: two documents, a tagged
    discussion file, a manifest and a service config wired to the offline
    providers. Returns the config path."""
    docs = root / "docs"
    docs.mkdir(parents=True, exist_ok=True)
    (docs / "getting_started.md").write_text(
        "# Getting started\n\n"
        "Install the tool chain by building from source with cmake.\n\n"
        "# First design\n\n"
        "Load a design, then run floorplanning and placement.\n\n"
        "# Clock tree synthesis\n\n"
        "Clock tree synthesis balances clock skew across the design.\n",
        encoding="utf-8",
    )
    (docs / "commands.html").write_text(
        "<html><body><h1>Command reference</h1>"
        "<p>The <code>global_route</code> command assigns nets to routing regions.</p>"
        "<p>See <a href='https://docs.example.com/commands#sta'>timing analysis</a> "
        "for setup and hold slack reports.</p></body></html>",
        encoding="utf-8",
    )
    records = [
        {"id": "i1", "kind": "issue", "title": "Build fails on cmake",
         "body": "The build fails with a cmake configuration error.",
         "comments": ["Upgrade cmake to 3.20 or newer."],
         "url": "https://forum.example.com/i1",
         "category": "Build", "subcategory": "cmake"},
        {"id": "d1", "kind": "discussion", "title": "How to report slack?",
         "body": "Which command reports setup and hold slack?",
         "comments": ["Use the timing report command."],
         "url": "https://forum.example.com/d1",
         "category": "Query", "subcategory": "timing"},
    ]
    (root / "discussions.jsonl").write_text(
        "\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
    (root / "manifest.txt").write_text(
        "# demo corpus\n"
        "version v1.0\n"
        "docs/getting_started.md\tmarkdown\thttps://docs.example.com/getting_started\tdocs\n"
        "docs/commands.html\thtml\thttps://docs.example.com/commands\tdocs\n"
        "discussions.jsonl\tdiscussion\thttps://forum.example.com\tdiscussions\n",
        encoding="utf-8",
    )
    (root / "config.yaml").write_text(
        "manifest: manifest.txt\n"
        "data_dir: data\n"
        "max_chunk_chars: 400\n"
        "retrieval:\n"
        "  k: 3\n"
        "  similarity_n: 3\n"
        "  mmr_n: 3\n"
        "  mmr_pool: 6\n"
        "  bm25_n: 3\n"
        "  fused_candidates: 6\n"
        "providers:\n"
        "  chat: {kind: extractive-chat}\n"
        "  embed: {kind: hash-embedder, dim: 16}\n"
        "  rerank: {kind: lexical-reranker}\n"
        "tools:\n"
        "  - name: docs\n"
        "    description: General documentation and command reference.\n"
        "    tags: [docs]\n"
        "  - name: discussions\n"
        "    description: Curated community issues and discussions.\n"
        "    tags: [discussions]\n"
        "default_tool: docs\n"
        "max_tools: 2\n",
        encoding="utf-8",
    )
    return root / "config.yaml"


@pytest.fixture
def demo_config(tmp_path):
    return write_demo_workspace(tmp_path)


@pytest.fixture
def small_kb(embedder):
    texts = [
        "clock tree synthesis balances skew across the design",
        "global routing assigns nets to routing regions",
        "detailed placement legalizes cell positions",
        "static timing analysis reports setup and hold slack",
        "floorplanning defines the die area and core margins",
    ]
    return build_knowledge_base("docs", make_chunks(texts), embedder)

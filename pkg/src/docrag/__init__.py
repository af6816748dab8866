"""docrag: tool-routed hybrid-retrieval conversation engine for
documentation corpora, with an LLM-judge evaluation harness."""

__version__ = "0.1.0"

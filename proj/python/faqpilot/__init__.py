"""Real-time FAQ suggestions for contact-center agents."""

from ._core import (
    Conversation,
    DeterministicEmbedder,
    Engine,
    Error,
    FaqEntry,
    FaqStore,
    Session,
    compare,
    cosine,
    kmeans,
    load_transcripts,
    mine,
    replay,
    run_cli,
    save_transcripts,
    synth_corpus,
)

__all__ = [
    "Conversation",
    "DeterministicEmbedder",
    "Engine",
    "Error",
    "FaqEntry",
    "FaqStore",
    "Session",
    "compare",
    "cosine",
    "kmeans",
    "load_transcripts",
    "mine",
    "replay",
    "run_cli",
    "save_transcripts",
    "synth_corpus",
]

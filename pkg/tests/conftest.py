from __future__ import annotations

import pytest

from lexcorpus.corpus import Document, WhitespaceTokenizer, resolve_source


@pytest.fixture(scope="session")
def tok() -> WhitespaceTokenizer:
    return WhitespaceTokenizer()


@pytest.fixture()
def make_doc():
    """Factory for documents with a registered source and auto-incrementing ids."""
    counter = {"n": 0}

    def _make(text: str, source: str = "freelaw", doc_id: str | None = None, **meta: str) -> Document:
        counter["n"] += 1
        return Document(
            id=doc_id or f"doc-{counter['n']:04d}",
            source=resolve_source(source),
            text=text,
            meta=dict(meta),
        )

    return _make

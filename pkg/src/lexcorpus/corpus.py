"""Canonical document model and streaming corpus I/O.

A corpus file is UTF-8, newline-delimited JSON, one document per line:

    {"id": "...", "source": "...", "text": "...", "meta": {"k": "v"}, "token_count": 123}

``meta`` is a flat string-to-string map and ``token_count`` is optional.
Every stage of the toolkit reads and writes this format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, Optional


class CorpusError(Exception):
    """Malformed corpus file or record."""


class DuplicateIdError(CorpusError):
    """The same document id appeared twice in one corpus file."""


class UnknownSourceError(CorpusError):
    """Source name not present in the source registry."""


SOURCE_KINDS = ("legal", "replay", "instruction")

# Shipped registry: the legal collections the pretraining mix draws from,
# the general-domain replay classes, and the instruction classes. Extend at
# runtime with register_source().
DEFAULT_SOURCES: Dict[str, str] = {
    "freelaw": "legal",
    "edgar": "legal",
    "multilegal_pile": "legal",
    "europarl": "legal",
    "govinfo": "legal",
    "law_stackexchange": "legal",
    "australian_legal": "legal",
    "eu_legislation": "legal",
    "uk_legislation": "legal",
    "court_transcripts": "legal",
    "uspto": "legal",
    "legal": "legal",
    "wikipedia": "replay",
    "stackexchange": "replay",
    "github": "replay",
    "replay": "replay",
    "super_natural_instructions": "instruction",
    "flan": "instruction",
    "instruction": "instruction",
}

_registry: Dict[str, str] = dict(DEFAULT_SOURCES)


def register_source(name: str, kind: str) -> None:
    """Add a source name to the registry (idempotent for identical kind)."""
    if kind not in SOURCE_KINDS:
        raise ValueError(f"unknown source kind {kind!r}, expected one of {SOURCE_KINDS}")
    existing = _registry.get(name)
    if existing is not None and existing != kind:
        raise ValueError(f"source {name!r} already registered with kind {existing!r}")
    _registry[name] = kind


def resolve_source(name: str) -> "SourceTag":
    kind = _registry.get(name)
    if kind is None:
        raise UnknownSourceError(f"source {name!r} is not in the registry; call register_source() first")
    return SourceTag(name=name, kind=kind)


@dataclass(frozen=True)
class SourceTag:
    name: str
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"invalid source kind {self.kind!r}")
        registered = _registry.get(self.name)
        if registered is not None and registered != self.kind:
            raise ValueError(
                f"source {self.name!r} is registered as {registered!r}, not {self.kind!r}"
            )


@dataclass
class Document:
    """One corpus record. Treated as immutable after construction; the lone
    exception is the lazily-filled token_count cache."""

    id: str
    source: SourceTag
    text: str
    meta: Dict[str, str] = field(default_factory=dict)
    token_count: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be non-empty")


class Tokenizer:
    """Deterministic text-to-token interface; subclass and implement tokenize()."""

    name = "abstract"

    def tokenize(self, text: str) -> list[str]:
        raise NotImplementedError


class WhitespaceTokenizer(Tokenizer):
    """Default tokenizer: split on runs of whitespace."""

    name = "whitespace"

    def tokenize(self, text: str) -> list[str]:
        return text.split()


def get_tokenizer(name: str) -> Tokenizer:
    if name == "whitespace":
        return WhitespaceTokenizer()
    raise ValueError(f"unknown tokenizer {name!r}")


def count_tokens(doc: Document, tok: Tokenizer) -> int:
    """Token count of the document text, cached on the document.

    The cache does not record which tokenizer produced it; use one tokenizer
    per run (the pipeline does).
    """
    if doc.token_count is None:
        doc.token_count = len(tok.tokenize(doc.text))
    return doc.token_count


def _check_unicode_clean(text: str) -> None:
    # JSON happily smuggles lone surrogates ("\ud800") through json.loads;
    # reject anything that cannot round-trip through UTF-8.
    try:
        text.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise CorpusError(f"text is not valid Unicode: {exc}") from None


def _parse_record(raw: bytes, lineno: int) -> Document:
    try:
        line = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusError(f"line {lineno}: invalid UTF-8 ({exc})") from None
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"line {lineno}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise CorpusError(f"line {lineno}: record is not a JSON object")
    for key in ("id", "source", "text"):
        if key not in obj:
            raise CorpusError(f"line {lineno}: missing field {key!r}")
        if not isinstance(obj[key], str):
            raise CorpusError(f"line {lineno}: field {key!r} must be a string")
    if not obj["id"]:
        raise CorpusError(f"line {lineno}: empty id")
    _check_unicode_clean(obj["text"])
    meta = obj.get("meta", {})
    if not isinstance(meta, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in meta.items()
    ):
        raise CorpusError(f"line {lineno}: meta must be a flat string-to-string object")
    token_count = obj.get("token_count")
    if token_count is not None and (not isinstance(token_count, int) or token_count < 0):
        raise CorpusError(f"line {lineno}: token_count must be a nonnegative integer")
    try:
        source = resolve_source(obj["source"])
    except UnknownSourceError as exc:
        raise CorpusError(f"line {lineno}: {exc}") from None
    return Document(
        id=obj["id"],
        source=source,
        text=obj["text"],
        meta=dict(meta),
        token_count=token_count,
    )


class CorpusReader:
    """Streaming iterator over a corpus file.

    Memory use is bounded by the largest single record. In lenient mode
    malformed records are skipped; ``.skipped`` holds the running count and
    is final once the stream is exhausted. Duplicate ids are an error in
    either mode.
    """

    def __init__(self, path: str | Path, strict: bool = False):
        self.path = Path(path)
        self.strict = strict
        self.skipped = 0
        self.count = 0
        if not self.path.exists():
            raise FileNotFoundError(f"corpus file not found: {self.path}")

    def __iter__(self) -> Iterator[Document]:
        seen: set[str] = set()
        with open(self.path, "rb") as fh:
            for lineno, raw in enumerate(fh, start=1):
                if not raw.strip():
                    continue
                try:
                    doc = _parse_record(raw, lineno)
                except CorpusError:
                    if self.strict:
                        raise
                    self.skipped += 1
                    continue
                if doc.id in seen:
                    raise DuplicateIdError(f"line {lineno}: duplicate document id {doc.id!r}")
                seen.add(doc.id)
                self.count += 1
                yield doc


def read_documents(path: str | Path, strict: bool = False) -> CorpusReader:
    """Open a corpus file for streaming; iterate the returned reader."""
    return CorpusReader(path, strict=strict)


def document_to_json(doc: Document) -> str:
    record = {
        "id": doc.id,
        "source": doc.source.name,
        "text": doc.text,
        "meta": doc.meta,
    }
    if doc.token_count is not None:
        record["token_count"] = doc.token_count
    return json.dumps(record, ensure_ascii=False, sort_keys=True)


def write_documents(docs: Iterable[Document], path: str | Path) -> int:
    """Write documents as corpus JSONL; returns the record count.

    Round-trip contract: read_documents() on the output reproduces the
    input field for field.
    """
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            _check_unicode_clean(doc.text)
            fh.write(document_to_json(doc))
            fh.write("\n")
            count += 1
    return count

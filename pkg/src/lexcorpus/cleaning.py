"""Text normalization, artifact n-gram mining, and rule-based filtering.

The shipped rules target the junk that PDF extraction leaves behind in
legal corpora: runs of repeated punctuation used as visual separators,
stray HTML tags, and repeated whitespace.
"""

from __future__ import annotations

import json
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

from .corpus import Document, Tokenizer

RULE_ACTIONS = ("delete_match", "collapse_whitespace", "strip_html")

# Rule application must reach a fixed point quickly; more passes than this
# means a rule keeps rewriting its own output.
_MAX_PASSES = 25


class RuleConfigError(Exception):
    """A rule file or rule definition that cannot be compiled."""


def normalize_text(text: str) -> str:
    """NFKC-normalize; output is a fixed point of the operation."""
    return unicodedata.normalize("NFKC", text)


@dataclass(frozen=True)
class Rule:
    pattern: str
    action: str
    replacement: str = ""
    note: str = ""

    def __post_init__(self) -> None:
        if self.action not in RULE_ACTIONS:
            raise RuleConfigError(f"unknown rule action {self.action!r}")
        try:
            compiled = re.compile(self.pattern)
        except re.error as exc:
            raise RuleConfigError(f"pattern {self.pattern!r} does not compile: {exc}") from None
        object.__setattr__(self, "_compiled", compiled)

    def apply(self, text: str) -> str:
        if self.action == "collapse_whitespace":
            return self._compiled.sub(self.replacement, text)
        # delete_match and strip_html both erase the match; the distinct
        # action names keep rule files self-describing.
        return self._compiled.sub("", text)


@dataclass(frozen=True)
class RuleSet:
    rules: Tuple[Rule, ...]


def build_default_ruleset() -> RuleSet:
    """The shipped cleaning rules.

    Repeated-punctuation runs (`-`, `.`, `*`, `=`, `_`) of length >= 5,
    with or without interleaved spaces, are removed; runs shorter than 5
    survive so legal ellipses stay intact. Whitespace collapse keeps one
    blank line between paragraphs because the perplexity filter operates
    per paragraph.
    """
    return RuleSet(
        rules=(
            Rule(
                pattern=r"</?[A-Za-z][A-Za-z0-9]*(?:[^<>\n]*)?/?>",
                action="strip_html",
                note="html tags that survived text extraction",
            ),
            Rule(
                pattern=r"(?m)^[ \t]*([-.*=_])( ?\1){4,}[ \t]*\n?",
                action="delete_match",
                note="separator line of repeated punctuation, a top pdf-extraction artifact",
            ),
            Rule(
                pattern=r"(?<![\w.])([-.*=_])( ?\1){4,}",
                action="delete_match",
                note="inline run of repeated punctuation, a top pdf-extraction artifact; "
                "anchored off word ends so sentence-final periods survive",
            ),
            Rule(
                pattern=r"[ \t]{2,}",
                action="collapse_whitespace",
                replacement=" ",
                note="repeated spaces/tabs",
            ),
            Rule(
                pattern=r"[ \t]*\n[ \t]*",
                action="collapse_whitespace",
                replacement="\n",
                note="whitespace hugging a line break",
            ),
            Rule(
                pattern=r"\n{3,}",
                action="collapse_whitespace",
                replacement="\n\n",
                note="runs of blank lines; one blank line marks a paragraph boundary",
            ),
        )
    )


def apply_rules(text: str, rules: RuleSet) -> str:
    """Apply the rule list repeatedly until the text stops changing."""
    for _ in range(_MAX_PASSES):
        new = text
        for rule in rules.rules:
            new = rule.apply(new)
        new = new.strip()
        if new == text:
            return new
        text = new
    raise RuntimeError("rule application did not reach a fixed point")


def clean_text(text: str, rules: RuleSet | None = None) -> str:
    """normalize_text + apply_rules, iterated to a joint fixed point."""
    if rules is None:
        rules = build_default_ruleset()
    for _ in range(_MAX_PASSES):
        new = apply_rules(normalize_text(text), rules)
        if new == text:
            return new
        text = new
    raise RuntimeError("cleaning did not reach a fixed point")


def split_paragraphs(text: str) -> List[str]:
    """Paragraph = maximal run of non-blank lines."""
    paragraphs = []
    current: List[str] = []
    for line in text.split("\n"):
        if line.strip():
            current.append(line)
        elif current:
            paragraphs.append("\n".join(current))
            current = []
    if current:
        paragraphs.append("\n".join(current))
    return paragraphs


def load_ruleset(path: str | Path) -> RuleSet:
    """Load rules from a JSON file: a list of {pattern, action, replacement?, note?}.

    Configuration errors (bad action, pattern that fails to compile) raise
    here, never mid-stream.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise RuleConfigError(f"rule file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, list):
        raise RuleConfigError("rule file must contain a JSON list")
    rules = []
    for entry in raw:
        if not isinstance(entry, dict) or "pattern" not in entry or "action" not in entry:
            raise RuleConfigError(f"rule entry must have pattern and action: {entry!r}")
        rules.append(
            Rule(
                pattern=entry["pattern"],
                action=entry["action"],
                replacement=entry.get("replacement", ""),
                note=entry.get("note", ""),
            )
        )
    return RuleSet(rules=tuple(rules))


def save_ruleset(rules: RuleSet, path: str | Path) -> None:
    entries = [
        {"pattern": r.pattern, "action": r.action, "replacement": r.replacement, "note": r.note}
        for r in rules.rules
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(entries, fh, indent=2, ensure_ascii=False)
        fh.write("\n")


@dataclass
class NgramTable:
    """Top n-gram counts; keys are token tuples of length n, total is the
    sum of the stored counts."""

    n: int
    entries: Dict[Tuple[str, ...], int]
    total: int


def _doc_ngrams(tokens: Sequence[str], n: int) -> Iterable[Tuple[str, ...]]:
    for i in range(len(tokens) - n + 1):
        yield tuple(tokens[i : i + n])


def mine_ngrams(docs: Iterable[Document], tok: Tokenizer, n: int, top_k: int) -> NgramTable:
    """Exact top-k n-gram counts over a corpus; ties break lexicographically."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    counts: Counter = Counter()
    for doc in docs:
        counts.update(_doc_ngrams(tok.tokenize(doc.text), n))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    entries = dict(ranked)
    return NgramTable(n=n, entries=entries, total=sum(entries.values()))


def merge_ngram_counts(tables: Sequence[Counter]) -> Counter:
    """Associative merge of partial count tables (pointwise addition)."""
    merged: Counter = Counter()
    for table in tables:
        merged.update(table)
    return merged


def write_ngram_report(table: NgramTable, path: str | Path) -> None:
    """Tab-separated `count<TAB>ngram`, descending by count."""
    rows = sorted(table.entries.items(), key=lambda kv: (-kv[1], kv[0]))
    with open(path, "w", encoding="utf-8") as fh:
        for ngram, count in rows:
            fh.write(f"{count}\t{' '.join(ngram)}\n")

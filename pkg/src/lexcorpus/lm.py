"""Interpolated Kneser-Ney n-gram language model and perplexity filtering.

The model exists to score text for corpus filtering, not to model legal
prose well. Training is a single pass: raw counts at the highest order,
continuation counts (number of distinct left extensions) at every lower
order, absolute discounts estimated per order from count-of-counts, and
the leftover discount mass interpolated with the next-lower order. The
bottom of the recursion interpolates the unigram distribution with a
uniform distribution over the predictable vocabulary (all known tokens,
the end-of-paragraph marker, and the unknown token), so every probability
is strictly positive and every conditional distribution sums to one.

Paragraphs are the sentence unit: each paragraph is padded with order-1
begin markers and one end marker before counting (no padding at order 1,
where markers carry no information).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .cleaning import split_paragraphs
from .corpus import Document, Tokenizer, count_tokens

UNK = "<unk>"
BOS = "<s>"
EOS = "</s>"
UNK_ID = 0
BOS_ID = 1
EOS_ID = 2

MODEL_FORMAT = "lexcorpus-knlm"
MODEL_VERSION = 1

NGram = Tuple[int, ...]


class TrainingError(Exception):
    """Seed corpus or parameters unusable for training."""


class ScoreError(Exception):
    """Text that cannot be scored (e.g. empty after tokenization)."""


@dataclass
class PerplexityScore:
    log_prob_sum: float
    token_count: int
    perplexity: float

    @classmethod
    def from_log_probs(cls, log_probs: Sequence[float]) -> "PerplexityScore":
        if not log_probs:
            raise ScoreError("cannot score zero tokens")
        total = math.fsum(log_probs)
        if total == float("-inf"):
            ppl = float("inf")
        else:
            ppl = math.exp(-total / len(log_probs))
        return cls(log_prob_sum=total, token_count=len(log_probs), perplexity=ppl)


class NGramLM:
    """Trained model state; immutable after training and safe to share
    between scoring threads."""

    def __init__(
        self,
        order: int,
        vocab: Dict[str, int],
        counts: List[Dict[NGram, int]],
        discounts: List[float],
    ):
        self.order = order
        self.vocab = vocab
        self.id_to_token = [""] * len(vocab)
        for token, idx in vocab.items():
            self.id_to_token[idx] = token
        # counts[k-1] maps k-gram id tuples to adjusted counts
        self.counts = counts
        self.discounts = discounts
        self._finalize()

    def _finalize(self) -> None:
        # Per-context totals and distinct-successor counts for each order,
        # plus the unigram aggregates used at the bottom of the recursion.
        self.context_totals: List[Dict[NGram, Tuple[int, int]]] = []
        for k in range(1, self.order + 1):
            totals: Dict[NGram, Tuple[int, int]] = {}
            for gram, c in self.counts[k - 1].items():
                ctx = gram[:-1]
                total, distinct = totals.get(ctx, (0, 0))
                totals[ctx] = (total + c, distinct + 1)
            self.context_totals.append(totals)
        self.unigram_total, self.unigram_types = self.context_totals[0].get((), (0, 0))
        # Predictable vocabulary: everything except the begin marker.
        self.uniform_size = len(self.vocab) - 1

    # -- probabilities ----------------------------------------------------

    def _prob_ids(self, order: int, context: NGram, word: int) -> float:
        if order == 1:
            d = self.discounts[0]
            c = self.counts[0].get((word,), 0)
            base = 1.0 / self.uniform_size
            if self.unigram_total == 0:
                return base
            reserved = d * self.unigram_types / self.unigram_total
            return max(c - d, 0.0) / self.unigram_total + reserved * base
        entry = self.context_totals[order - 1].get(context)
        if entry is None:
            return self._prob_ids(order - 1, context[1:], word)
        total, distinct = entry
        d = self.discounts[order - 1]
        c = self.counts[order - 1].get(context + (word,), 0)
        lower = self._prob_ids(order - 1, context[1:], word)
        return max(c - d, 0.0) / total + (d * distinct / total) * lower

    def token_id(self, token: str) -> int:
        return self.vocab.get(token, UNK_ID)

    def probability(self, context: Sequence[str], token: str) -> float:
        """p(token | context), context truncated to order-1 most recent tokens."""
        ctx_ids = tuple(self.token_id(t) for t in context)[-(self.order - 1) :] if self.order > 1 else ()
        if self.order > 1 and len(ctx_ids) < self.order - 1:
            ctx_ids = (BOS_ID,) * (self.order - 1 - len(ctx_ids)) + ctx_ids
        return self._prob_ids(self.order, ctx_ids, self.token_id(token))

    def predictable_tokens(self) -> List[str]:
        """All tokens a conditional distribution ranges over (begin marker excluded)."""
        return [t for t in self.id_to_token if t != BOS]

    def observed_contexts(self, order: Optional[int] = None) -> List[Tuple[str, ...]]:
        k = order or self.order
        return [
            tuple(self.id_to_token[i] for i in ctx) for ctx in self.context_totals[k - 1]
        ]

    # -- scoring -----------------------------------------------------------

    def paragraph_log_probs(self, tokens: Sequence[str]) -> List[float]:
        """Per-token log probabilities for one paragraph. End markers are
        used in training counts but not scored, so len(result) == len(tokens)."""
        ids = [self.token_id(t) for t in tokens]
        out: List[float] = []
        if self.order == 1:
            for w in ids:
                out.append(_safe_log(self._prob_ids(1, (), w)))
            return out
        context: NGram = (BOS_ID,) * (self.order - 1)
        for w in ids:
            out.append(_safe_log(self._prob_ids(self.order, context, w)))
            context = context[1:] + (w,)
        return out

    def token_log_probs(self, text: str, tok: Tokenizer) -> List[float]:
        log_probs: List[float] = []
        for para in split_paragraphs(text):
            tokens = tok.tokenize(para)
            if tokens:
                log_probs.extend(self.paragraph_log_probs(tokens))
        return log_probs


def _safe_log(p: float) -> float:
    return math.log(p) if p > 0.0 else float("-inf")


def _estimate_discount(count_values: Iterable[int]) -> float:
    n1 = 0
    n2 = 0
    for c in count_values:
        if c == 1:
            n1 += 1
        elif c == 2:
            n2 += 1
    if n1 == 0:
        # Degenerate count-of-counts (tiny or highly repetitive corpora);
        # fall back to a mild discount so unseen mass stays positive.
        return 0.5
    return min(n1 / (n1 + 2.0 * n2), 1.0 - 1e-6)


def train_lm(
    docs: Iterable[Document],
    tok: Tokenizer,
    order: int = 5,
    discount: Optional[float] = None,
) -> NGramLM:
    """Train an interpolated Kneser-Ney model on a seed corpus.

    discount=None estimates per-order discounts via n1/(n1 + 2*n2); passing
    an explicit value (e.g. 0.0 to disable discounting for maximum-likelihood
    checks) applies it at every order.
    """
    if order < 1:
        raise TrainingError("order must be >= 1")
    if discount is not None and not 0.0 <= discount < 1.0:
        raise TrainingError("discount must lie in [0, 1)")

    vocab: Dict[str, int] = {UNK: UNK_ID, BOS: BOS_ID, EOS: EOS_ID}
    paragraphs: List[List[int]] = []
    for doc in docs:
        for para in split_paragraphs(doc.text):
            tokens = tok.tokenize(para)
            if not tokens:
                continue
            ids = []
            for t in tokens:
                if t not in vocab:
                    vocab[t] = len(vocab)
                ids.append(vocab[t])
            paragraphs.append(ids)
    if not paragraphs:
        raise TrainingError("seed corpus is empty after tokenization")

    counts: List[Dict[NGram, int]] = [dict() for _ in range(order)]
    top = counts[order - 1]
    if order == 1:
        for ids in paragraphs:
            for w in ids:
                key = (w,)
                top[key] = top.get(key, 0) + 1
    else:
        pad = (BOS_ID,) * (order - 1)
        for ids in paragraphs:
            seq = pad + tuple(ids) + (EOS_ID,)
            for i in range(len(seq) - order + 1):
                gram = seq[i : i + order]
                top[gram] = top.get(gram, 0) + 1
        # Continuation counts: at order k, count distinct left extensions
        # present at order k+1.
        for k in range(order - 1, 0, -1):
            lower = counts[k - 1]
            for gram in counts[k]:
                suffix = gram[1:]
                lower[suffix] = lower.get(suffix, 0) + 1

    if discount is not None:
        discounts = [discount] * order
    else:
        discounts = [_estimate_discount(counts[k].values()) for k in range(order)]

    return NGramLM(order=order, vocab=vocab, counts=counts, discounts=discounts)


def score(lm: NGramLM, text: str, tok: Tokenizer) -> PerplexityScore:
    """Perplexity of text under the model; unknown tokens map to <unk>."""
    return PerplexityScore.from_log_probs(lm.token_log_probs(text, tok))


# -- filtering --------------------------------------------------------------


@dataclass
class FilterReport:
    threshold: float
    granularity: str
    kept_docs: int = 0
    dropped_docs: int = 0
    per_source: Dict[str, Dict[str, int]] = field(default_factory=dict)

    def _bucket(self, source: str) -> Dict[str, int]:
        return self.per_source.setdefault(source, {"kept_tokens": 0, "dropped_tokens": 0})

    def to_json(self) -> str:
        payload = {
            "threshold": self.threshold,
            "granularity": self.granularity,
            "kept_docs": self.kept_docs,
            "dropped_docs": self.dropped_docs,
            "per_source": self.per_source,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def filter_by_perplexity(
    docs: Iterable[Document],
    lm: NGramLM,
    tok: Tokenizer,
    threshold: float,
    granularity: str = "paragraph",
) -> Tuple[List[Document], List[Document], FilterReport]:
    """Split a corpus into kept and dropped parts by perplexity.

    At paragraph granularity each document is split on blank lines,
    paragraphs scoring above the threshold are dropped, and the document is
    reassembled from the survivors. The dropped stream carries the removed
    text under the original document id, so kept plus dropped token counts
    equal the input exactly.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if granularity not in ("paragraph", "document"):
        raise ValueError("granularity must be 'paragraph' or 'document'")

    report = FilterReport(threshold=threshold, granularity=granularity)
    kept_docs: List[Document] = []
    dropped_docs: List[Document] = []

    for doc in docs:
        bucket = report._bucket(doc.source.name)
        if granularity == "document":
            parts = [doc.text]
        else:
            parts = split_paragraphs(doc.text)
        kept_parts: List[str] = []
        dropped_parts: List[str] = []
        kept_tokens = 0
        dropped_tokens = 0
        for part in parts:
            tokens = tok.tokenize(part)
            if not tokens:
                kept_parts.append(part)
                continue
            ppl = PerplexityScore.from_log_probs(lm.paragraph_log_probs(tokens)).perplexity
            if ppl > threshold:
                dropped_parts.append(part)
                dropped_tokens += len(tokens)
            else:
                kept_parts.append(part)
                kept_tokens += len(tokens)
        bucket["kept_tokens"] += kept_tokens
        bucket["dropped_tokens"] += dropped_tokens
        if kept_parts:
            text = "\n\n".join(kept_parts)
            kept_docs.append(
                Document(id=doc.id, source=doc.source, text=text, meta=dict(doc.meta))
            )
            report.kept_docs += 1
        if dropped_parts:
            text = "\n\n".join(dropped_parts)
            dropped_docs.append(
                Document(id=doc.id, source=doc.source, text=text, meta=dict(doc.meta))
            )
            if not kept_parts:
                report.dropped_docs += 1
    return kept_docs, dropped_docs, report


def calibrate_threshold(
    lm: NGramLM,
    docs: Iterable[Document],
    tok: Tokenizer,
    percentile: float = 99.0,
) -> float:
    """Perplexity threshold at the given percentile of per-paragraph
    perplexities over a corpus (linear interpolation between order stats)."""
    if not 0 < percentile <= 100:
        raise ValueError("percentile must lie in (0, 100]")
    ppls: List[float] = []
    for doc in docs:
        for para in split_paragraphs(doc.text):
            tokens = tok.tokenize(para)
            if tokens:
                ppls.append(PerplexityScore.from_log_probs(lm.paragraph_log_probs(tokens)).perplexity)
    if not ppls:
        raise ValueError("no scorable paragraphs for calibration")
    ppls.sort()
    rank = (percentile / 100.0) * (len(ppls) - 1)
    low = int(math.floor(rank))
    high = int(math.ceil(rank))
    if low == high:
        return ppls[low]
    frac = rank - low
    return ppls[low] * (1 - frac) + ppls[high] * frac


# -- serialization -----------------------------------------------------------


def save_lm(lm: NGramLM, path: str | Path) -> None:
    """Write the documented model format: JSON with order, per-order
    discounts, vocab in id order, and adjusted counts keyed by space-joined
    token ids. Stable byte-for-byte for identical models."""
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "order": lm.order,
        "discounts": lm.discounts,
        "vocab": lm.id_to_token,
        "counts": [
            {" ".join(map(str, gram)): c for gram, c in sorted(table.items())}
            for table in lm.counts
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True)
        fh.write("\n")


def load_lm(path: str | Path) -> NGramLM:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path} is not a {MODEL_FORMAT} file")
    if payload.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {payload.get('version')}")
    vocab = {token: idx for idx, token in enumerate(payload["vocab"])}
    counts: List[Dict[NGram, int]] = []
    for table in payload["counts"]:
        counts.append({tuple(int(x) for x in key.split()): c for key, c in table.items()})
    return NGramLM(
        order=payload["order"],
        vocab=vocab,
        counts=counts,
        discounts=[float(d) for d in payload["discounts"]],
    )


def corpus_token_total(docs: Iterable[Document], tok: Tokenizer) -> int:
    return sum(count_tokens(doc, tok) for doc in docs)

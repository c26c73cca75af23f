"""Exact and near-duplicate removal for document corpora.

Exact dedup collapses byte-identical normalized text via content hashing.
Near dedup sketches each document with MinHash over token shingles, finds
candidate pairs through LSH band collisions, verifies candidates with the
signature-level Jaccard estimate, and resolves connected components so the
first document in stream order survives per cluster.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .cleaning import normalize_text
from .corpus import Document, Tokenizer, WhitespaceTokenizer, count_tokens

DEFAULT_SHINGLE_N = 5
DEFAULT_PERMUTATIONS = 128
DEFAULT_THRESHOLD = 0.7

_SHINGLE_SEP = b"\x1f"
_HASH_CHUNK = 4096


@dataclass
class MinHashSignature:
    doc_id: str
    values: np.ndarray  # shape (permutations,), dtype uint64
    shingle_count: int
    shingle_n: int
    permutations: int
    seed: int

    def compatible_with(self, other: "MinHashSignature") -> bool:
        return (
            self.shingle_n == other.shingle_n
            and self.permutations == other.permutations
            and self.seed == other.seed
        )


def _shingle_hashes(tokens: Sequence[str], shingle_n: int) -> np.ndarray:
    """64-bit hash per distinct shingle. Texts shorter than one shingle get
    a single degenerate shingle spanning the whole token sequence."""
    if len(tokens) < shingle_n:
        windows = [tuple(tokens)]
    else:
        windows = [tuple(tokens[i : i + shingle_n]) for i in range(len(tokens) - shingle_n + 1)]
    hashes = set()
    for window in windows:
        digest = hashlib.blake2b(
            _SHINGLE_SEP.join(t.encode("utf-8") for t in window), digest_size=8
        ).digest()
        hashes.add(int.from_bytes(digest, "big"))
    return np.fromiter(hashes, dtype=np.uint64, count=len(hashes))


def _permutation_params(permutations: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2**64, size=permutations, dtype=np.uint64) | np.uint64(1)
    b = rng.integers(0, 2**64, size=permutations, dtype=np.uint64)
    return a, b


def minhash_signature(
    text: str,
    tok: Tokenizer,
    shingle_n: int = DEFAULT_SHINGLE_N,
    permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
    doc_id: str = "",
    _params: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> MinHashSignature:
    """MinHash sketch of the text's shingle set.

    Each of the `permutations` hash functions is a random odd-multiplier
    affine map over the 64-bit shingle hashes (wraparound arithmetic); the
    signature stores the per-function minimum. Deterministic in
    (text, shingle_n, permutations, seed).
    """
    if shingle_n < 1:
        raise ValueError("shingle_n must be >= 1")
    if permutations < 1:
        raise ValueError("permutations must be >= 1")
    a, b = _params if _params is not None else _permutation_params(permutations, seed)
    hashes = _shingle_hashes(tok.tokenize(text), shingle_n)
    mins = np.full(permutations, np.iinfo(np.uint64).max, dtype=np.uint64)
    for start in range(0, len(hashes), _HASH_CHUNK):
        chunk = hashes[start : start + _HASH_CHUNK]
        # uint64 arithmetic wraps modulo 2**64, as intended
        projected = chunk[:, None] * a[None, :] + b[None, :]
        np.minimum(mins, projected.min(axis=0), out=mins)
    return MinHashSignature(
        doc_id=doc_id,
        values=mins,
        shingle_count=int(len(hashes)),
        shingle_n=shingle_n,
        permutations=permutations,
        seed=seed,
    )


def estimate_jaccard(sig_a: MinHashSignature, sig_b: MinHashSignature) -> float:
    """Fraction of matching signature positions; unbiased Jaccard estimate."""
    if not sig_a.compatible_with(sig_b):
        raise ValueError("signatures built with different parameters are not comparable")
    return float(np.count_nonzero(sig_a.values == sig_b.values)) / sig_a.permutations


DETECTION_MARGIN = 0.1
DETECTION_FLOOR = 0.999


def optimal_band_split(permutations: int, threshold: float, steps: int = 512) -> Tuple[int, int]:
    """Pick (bands, rows) with bands*rows == permutations.

    A missed candidate pair is unrecoverable, while a false candidate only
    costs one signature comparison before verification rejects it. So among
    splits that detect pairs at threshold+0.1 near-certainly (collision
    probability >= 0.999), take the one with the least false-positive mass
    below the threshold; if no split reaches the floor (tiny permutation
    counts), fall back to minimizing the balanced error."""
    probe = min(threshold + DETECTION_MARGIN, 1.0)
    best_under_floor: Optional[Tuple[float, int, int]] = None
    best_balanced: Optional[Tuple[float, int, int]] = None
    for rows in range(1, permutations + 1):
        if permutations % rows:
            continue
        bands = permutations // rows
        fp = 0.0
        fn = 0.0
        for i in range(steps):
            s = (i + 0.5) / steps
            p = 1.0 - (1.0 - s**rows) ** bands
            if s < threshold:
                fp += p / steps
            else:
                fn += (1.0 - p) / steps
        balanced = 0.5 * fp + 0.5 * fn
        if best_balanced is None or balanced < best_balanced[0]:
            best_balanced = (balanced, bands, rows)
        detect = 1.0 - (1.0 - probe**rows) ** bands
        if detect >= DETECTION_FLOOR and (best_under_floor is None or fp < best_under_floor[0]):
            best_under_floor = (fp, bands, rows)
    chosen = best_under_floor or best_balanced
    assert chosen is not None
    return chosen[1], chosen[2]


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            # smaller stream index wins the root, keeping clusters ordered
            if ry < rx:
                rx, ry = ry, rx
            self.parent[ry] = rx


@dataclass
class DedupReport:
    clusters: List[Tuple[str, List[str]]] = field(default_factory=list)
    exact_removed: int = 0
    near_removed: int = 0
    tokens_before: int = 0
    tokens_after: int = 0

    def removed_ids(self) -> List[str]:
        out: List[str] = []
        for _, removed in self.clusters:
            out.extend(removed)
        return out

    def to_json(self) -> str:
        payload = {
            "clusters": [{"kept": kept, "removed": removed} for kept, removed in self.clusters],
            "exact_removed": self.exact_removed,
            "near_removed": self.near_removed,
            "tokens_before": self.tokens_before,
            "tokens_after": self.tokens_after,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def write_cluster_dump(report: DedupReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for kept, removed in report.clusters:
            for rid in removed:
                fh.write(f"{kept}\t{rid}\n")


def exact_dedup(
    docs: Iterable[Document], tok: Optional[Tokenizer] = None
) -> Tuple[List[Document], DedupReport]:
    """Collapse documents whose normalized text is byte-identical; first
    occurrence in stream order survives."""
    tok = tok or WhitespaceTokenizer()
    report = DedupReport()
    unique: List[Document] = []
    first_by_digest: Dict[str, int] = {}
    removed_by_kept: Dict[str, List[str]] = {}
    for doc in docs:
        tokens = count_tokens(doc, tok)
        report.tokens_before += tokens
        digest = hashlib.sha256(normalize_text(doc.text).encode("utf-8")).hexdigest()
        if digest in first_by_digest:
            kept_id = unique[first_by_digest[digest]].id
            removed_by_kept.setdefault(kept_id, []).append(doc.id)
            report.exact_removed += 1
        else:
            first_by_digest[digest] = len(unique)
            unique.append(doc)
            report.tokens_after += tokens
    report.clusters = [(doc.id, removed_by_kept[doc.id]) for doc in unique if doc.id in removed_by_kept]
    return unique, report


def near_dedup(
    docs: Iterable[Document],
    shingle_n: int = DEFAULT_SHINGLE_N,
    permutations: int = DEFAULT_PERMUTATIONS,
    threshold: float = DEFAULT_THRESHOLD,
    seed: int = 0,
    tok: Optional[Tokenizer] = None,
    shard_size: int = 10_000,
) -> Tuple[List[Document], DedupReport]:
    """Remove near-duplicates via MinHash/LSH.

    Candidate pairs come from LSH band collisions, are verified with
    estimate_jaccard >= threshold, and verified pairs are merged into
    connected components; the first document per component survives.
    Signatures are computed in shards of `shard_size` documents so peak
    memory stays bounded by the signature matrix, not by raw text.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    tok = tok or WhitespaceTokenizer()
    doc_list = list(docs)
    report = DedupReport()
    if not doc_list:
        return [], report

    params = _permutation_params(permutations, seed)
    bands, rows = optimal_band_split(permutations, threshold)

    signatures: List[MinHashSignature] = []
    buckets: List[Dict[bytes, List[int]]] = [dict() for _ in range(bands)]
    for shard_start in range(0, len(doc_list), shard_size):
        for idx in range(shard_start, min(shard_start + shard_size, len(doc_list))):
            doc = doc_list[idx]
            report.tokens_before += count_tokens(doc, tok)
            sig = minhash_signature(
                doc.text,
                tok,
                shingle_n=shingle_n,
                permutations=permutations,
                seed=seed,
                doc_id=doc.id,
                _params=params,
            )
            signatures.append(sig)
            for band in range(bands):
                key = sig.values[band * rows : (band + 1) * rows].tobytes()
                buckets[band].setdefault(key, []).append(idx)

    uf = _UnionFind(len(doc_list))
    checked: set = set()
    for band_map in buckets:
        for members in band_map.values():
            if len(members) < 2:
                continue
            for i in range(len(members)):
                for j in range(i + 1, len(members)):
                    pair = (members[i], members[j])
                    if pair in checked:
                        continue
                    checked.add(pair)
                    if estimate_jaccard(signatures[pair[0]], signatures[pair[1]]) >= threshold:
                        uf.union(pair[0], pair[1])

    members_by_root: Dict[int, List[int]] = {}
    for idx in range(len(doc_list)):
        members_by_root.setdefault(uf.find(idx), []).append(idx)

    removed: set = set()
    for root in sorted(members_by_root):
        members = sorted(members_by_root[root])
        if len(members) < 2:
            continue
        kept = members[0]
        removed.update(members[1:])
        report.clusters.append(
            (doc_list[kept].id, [doc_list[i].id for i in members[1:]])
        )
        report.near_removed += len(members) - 1

    unique = [doc for idx, doc in enumerate(doc_list) if idx not in removed]
    report.tokens_after = sum(count_tokens(doc, tok) for doc in unique)
    return unique, report

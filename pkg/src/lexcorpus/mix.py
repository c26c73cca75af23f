"""Assemble a training mix from tagged corpora to target token proportions.

Each source is shuffled with its own seeded RNG and sampled without
replacement until its realized token count reaches the requested share
(documents are atomic, so the realized share can overshoot by at most one
document). The combined list is then globally shuffled. All randomness
derives from the spec seed via stable hashing, so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from .corpus import (
    Document,
    DuplicateIdError,
    Tokenizer,
    WhitespaceTokenizer,
    count_tokens,
    resolve_source,
)

FRACTION_SUM_TOLERANCE = 1e-9


class MixError(Exception):
    """Spec/stream mismatch or unsatisfiable mix."""


class InsufficientTokensError(MixError):
    """A source ran out of documents before reaching its token share."""


def derive_seed(seed: int, name: str) -> int:
    """Stable per-stream RNG seed; never uses the salted builtin hash()."""
    digest = hashlib.sha256(f"{seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class MixSpec:
    entries: List[Tuple[str, float]]
    token_budget: int
    seed: int

    def __post_init__(self):
        if self.token_budget <= 0:
            raise MixError("token_budget must be positive")
        names = [name for name, _ in self.entries]
        if len(names) != len(set(names)):
            raise MixError("duplicate source names in mix spec")
        if not names:
            raise MixError("mix spec has no entries")
        for name, fraction in self.entries:
            resolve_source(name)  # raises UnknownSourceError for bad names
            if not 0.0 <= fraction <= 1.0:
                raise MixError(f"fraction for {name!r} outside [0, 1]")
        total = sum(fraction for _, fraction in self.entries)
        if abs(total - 1.0) > FRACTION_SUM_TOLERANCE:
            raise MixError(f"fractions sum to {total!r}, expected 1")

    def requested_tokens(self, name: str) -> int:
        for entry_name, fraction in self.entries:
            if entry_name == name:
                return round(fraction * self.token_budget)
        raise MixError(f"source {name!r} not in spec")


def load_mix_spec(path: str | Path) -> MixSpec:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        entries = [(e["source"], float(e["fraction"])) for e in payload["entries"]]
        return MixSpec(
            entries=entries,
            token_budget=int(payload["token_budget"]),
            seed=int(payload["seed"]),
        )
    except (KeyError, TypeError) as exc:
        raise MixError(f"malformed mix spec {path}: {exc}") from exc


def save_mix_spec(spec: MixSpec, path: str | Path) -> None:
    payload = {
        "entries": [{"source": name, "fraction": fraction} for name, fraction in spec.entries],
        "token_budget": spec.token_budget,
        "seed": spec.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class MixManifest:
    seed: int
    total_tokens: int = 0
    per_source: Dict[str, Dict[str, object]] = field(default_factory=dict)

    def realized_fraction(self, name: str) -> float:
        if self.total_tokens == 0:
            return 0.0
        return int(self.per_source[name]["realized_tokens"]) / self.total_tokens

    def to_json(self) -> str:
        payload = {
            "seed": self.seed,
            "total_tokens": self.total_tokens,
            "per_source": self.per_source,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MixManifest":
        payload = json.loads(text)
        return cls(
            seed=payload["seed"],
            total_tokens=payload["total_tokens"],
            per_source=payload["per_source"],
        )


def _ids_digest(ids: List[str]) -> str:
    return hashlib.sha256("\n".join(ids).encode("utf-8")).hexdigest()


def assemble_mix(
    sources: Dict[str, Iterable[Document]],
    spec: MixSpec,
    tok: Optional[Tokenizer] = None,
) -> Tuple[List[Document], MixManifest]:
    """Sample each source to its token share and emit a globally shuffled mix.

    Raises MixError for spec sources without a stream and
    InsufficientTokensError when a source cannot reach its share.
    """
    tok = tok or WhitespaceTokenizer()
    manifest = MixManifest(seed=spec.seed)
    mixed: List[Document] = []
    seen_ids: set = set()

    for name, fraction in spec.entries:
        if name not in sources:
            raise MixError(f"spec source {name!r} has no input stream")
        requested = spec.requested_tokens(name)
        docs = list(sources[name])
        rng = random.Random(derive_seed(spec.seed, name))
        rng.shuffle(docs)
        selected: List[Document] = []
        realized = 0
        for doc in docs:
            if realized >= requested:
                break
            if doc.id in seen_ids:
                raise DuplicateIdError(f"document id {doc.id!r} appears in more than one source")
            seen_ids.add(doc.id)
            selected.append(doc)
            realized += count_tokens(doc, tok)
        if realized < requested:
            raise InsufficientTokensError(
                f"source {name!r} exhausted at {realized} tokens, {requested} requested"
            )
        manifest.per_source[name] = {
            "requested_tokens": requested,
            "realized_tokens": realized,
            "documents": len(selected),
            "ids_digest": _ids_digest([doc.id for doc in selected]),
        }
        manifest.total_tokens += realized
        mixed.extend(selected)

    random.Random(derive_seed(spec.seed, "__global__")).shuffle(mixed)
    return mixed, manifest


@dataclass
class MixValidation:
    tolerance: float
    per_source: Dict[str, Dict[str, object]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(entry["pass"] for entry in self.per_source.values())

    def to_json(self) -> str:
        return json.dumps(
            {"tolerance": self.tolerance, "passed": self.passed, "per_source": self.per_source},
            indent=2,
            sort_keys=True,
        )


def validate_mix(manifest: MixManifest, spec: MixSpec, tolerance: float) -> MixValidation:
    """Per-source pass/fail on |realized fraction - target fraction| <= tolerance."""
    spec_names = {name for name, _ in spec.entries}
    manifest_names = set(manifest.per_source)
    if spec_names != manifest_names:
        raise MixError(
            f"source sets differ: spec has {sorted(spec_names)}, manifest has {sorted(manifest_names)}"
        )
    result = MixValidation(tolerance=tolerance)
    for name, fraction in spec.entries:
        realized = manifest.realized_fraction(name)
        deviation = abs(realized - fraction)
        result.per_source[name] = {
            "target_fraction": fraction,
            "realized_fraction": realized,
            "deviation": deviation,
            "pass": deviation <= tolerance,
        }
    return result

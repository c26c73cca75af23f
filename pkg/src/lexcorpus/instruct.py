"""Turn labeled legal examples into multi-turn instruction conversations.

Every conversation starts from a fixed three-turn scaffold rendered from
templates (user request, assistant answer restating the label and metadata,
user prompt to elaborate) and is then extended by alternating completions
from a user-role backend and an assistant-role backend. A deterministic
stub backend keeps tests and demos offline; the HTTP backend talks to any
chat endpoint speaking the simple JSON protocol documented on the class.

Decontamination removes conversations that share an n-token shingle with
any benchmark input, so instruction data can never leak test questions.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import requests

from .cleaning import normalize_text
from .corpus import Document, resolve_source

ROLES = ("user", "assistant")
DECONTAMINATION_SHINGLE_N = 8
AUTH_TOKEN_ENV = "LEXCORPUS_CHAT_TOKEN"


class TemplateError(Exception):
    """No scaffold template registered for an example's task type."""


class BackendError(Exception):
    """Chat backend transport failure."""


class ExtensionError(Exception):
    """Conversation extension failed; .reason is machine-readable."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(detail or reason)
        self.reason = reason


@dataclass
class LabeledExample:
    id: str
    input_text: str
    label: str
    meta: Dict[str, str] = field(default_factory=dict)
    task_type: str = "classification"

    def __post_init__(self):
        if not self.id:
            raise ValueError("example id must be non-empty")
        if not self.input_text.strip():
            raise ValueError("input_text must be non-empty")
        if not self.label.strip():
            raise ValueError("label must be non-empty")


@dataclass
class Turn:
    role: str
    text: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.text.strip():
            raise ValueError("turn text must be non-empty")


@dataclass
class Conversation:
    turns: List[Turn]
    origin: str
    generator: str = "scaffold"

    def __post_init__(self):
        if len(self.turns) < 3:
            raise ValueError("conversations have at least the 3 scaffold turns")
        for i, turn in enumerate(self.turns):
            expected = ROLES[i % 2]
            if turn.role != expected:
                raise ValueError(
                    f"turn {i} has role {turn.role!r}, expected {expected!r} "
                    "(roles must alternate starting with user)"
                )

    def messages(self) -> List[Dict[str, str]]:
        return [{"role": t.role, "content": t.text} for t in self.turns]


@dataclass(frozen=True)
class ScaffoldTemplate:
    """Format strings for the three fixed turns. Placeholders: {input_text}
    for the user request, {label} for the assistant answer."""

    user_request: str
    assistant_answer: str
    user_elaboration: str


DEFAULT_TEMPLATES: Dict[str, ScaffoldTemplate] = {
    "classification": ScaffoldTemplate(
        user_request=(
            "I came across the following text and I am not sure how to classify it. "
            "Could you take a look?\n\n{input_text}"
        ),
        assistant_answer='Having read it, I would classify this text under "{label}".',
        user_elaboration="Interesting. Could you walk me through the reasoning behind that classification?",
    ),
    "summarization": ScaffoldTemplate(
        user_request=(
            "Please read this legal document and tell me what it is about.\n\n{input_text}"
        ),
        assistant_answer="In essence, the document comes down to this: {label}.",
        user_elaboration="Thanks. Can you elaborate on how you arrived at that summary?",
    ),
    "qa": ScaffoldTemplate(
        user_request="I have a legal question about the following material.\n\n{input_text}",
        assistant_answer="The short answer is: {label}.",
        user_elaboration="Could you explain the reasoning behind that answer in more depth?",
    ),
}


def _metadata_sentence(meta: Dict[str, str]) -> str:
    if not meta:
        return ""
    rendered = "; ".join(f"{key}: {value}" for key, value in meta.items())
    return f" For context, the record carries these details — {rendered}."


def scaffold_conversation(
    ex: LabeledExample, templates: Optional[Dict[str, ScaffoldTemplate]] = None
) -> Conversation:
    """Render the three fixed turns for one labeled example.

    The assistant turn always restates the label and every metadata value,
    whatever the template says, so downstream audits can rely on it.
    """
    templates = templates if templates is not None else DEFAULT_TEMPLATES
    tmpl = templates.get(ex.task_type)
    if tmpl is None:
        raise TemplateError(f"no scaffold template for task type {ex.task_type!r}")
    assistant_text = tmpl.assistant_answer.format(label=ex.label) + _metadata_sentence(ex.meta)
    turns = [
        Turn("user", tmpl.user_request.format(input_text=ex.input_text)),
        Turn("assistant", assistant_text),
        Turn("user", tmpl.user_elaboration),
    ]
    return Conversation(turns=turns, origin=ex.id, generator="scaffold")


# -- backends ----------------------------------------------------------------


class ChatBackend:
    """Abstract chat-completion interface.

    complete() receives the conversation so far as [{role, content}] plus the
    role the completion will be attributed to, and returns the completion text.
    """

    name = "abstract"

    def complete(self, messages: Sequence[Dict[str, str]], role_hint: str) -> str:
        raise NotImplementedError


_STUB_USER_QUESTIONS = [
    "Which statute, regulation, or precedent bears most directly on this situation?",
    "How would the analysis change if the key facts were slightly different?",
    "What procedural steps would someone in this position usually take next?",
    "Are there notable exceptions or defenses that could alter the outcome?",
    "How have courts treated comparable cases in recent years?",
    "What practical risks should a layperson keep in mind here?",
]


class StubChatBackend(ChatBackend):
    """Deterministic offline backend: the completion is a pure function of
    the conversation prefix, so extended transcripts are reproducible."""

    name = "stub"

    def complete(self, messages: Sequence[Dict[str, str]], role_hint: str) -> str:
        if role_hint == "user":
            question = _STUB_USER_QUESTIONS[len(messages) % len(_STUB_USER_QUESTIONS)]
            return question
        last_user = next(
            (m["content"] for m in reversed(messages) if m["role"] == "user"), ""
        )
        topic = " ".join(last_user.split()[:8])
        return (
            f"Addressing your point about {topic} the controlling considerations are the "
            f"governing text, the precedent of the forum, and the specific facts. On turn "
            f"{len(messages) + 1} of this discussion, the balance of those factors supports "
            "the position I outlined, though a court would weigh the record as a whole."
        )


class HttpChatBackend(ChatBackend):
    """Remote chat endpoint.

    Protocol: POST JSON {"model", "messages": [{role, content}], "temperature",
    "max_tokens"}; the response body is JSON with the completion under
    "completion". The bearer token is read from the LEXCORPUS_CHAT_TOKEN
    environment variable when present. Transient transport errors and 5xx
    responses are retried with backoff; persistent failure raises BackendError.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        temperature: float = 0.7,
        max_tokens: int = 512,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        session: Optional[requests.Session] = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.session = session or requests.Session()
        self.name = f"http:{model}"

    def complete(self, messages: Sequence[Dict[str, str]], role_hint: str) -> str:
        payload = {
            "model": self.model,
            "messages": list(messages),
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        headers = {}
        token = os.environ.get(AUTH_TOKEN_ENV)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries):
            try:
                resp = self.session.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
                if resp.status_code >= 500:
                    last_error = BackendError(f"server error {resp.status_code}")
                elif resp.status_code != 200:
                    raise BackendError(f"unexpected status {resp.status_code}")
                else:
                    body = resp.json()
                    return str(body.get("completion", ""))
            except requests.RequestException as exc:
                last_error = exc
            if attempt + 1 < self.max_retries:
                time.sleep(self.backoff * (2**attempt))
        raise BackendError(f"chat endpoint unreachable after {self.max_retries} attempts: {last_error}")


# -- extension ---------------------------------------------------------------


def extend_conversation(
    conv: Conversation,
    user_backend: ChatBackend,
    assistant_backend: ChatBackend,
    extra_turn_pairs: int,
) -> Conversation:
    """Extend a scaffold by alternating completions, ending on an assistant
    turn: one assistant completion answers the scaffold's elaboration prompt,
    then each further pair adds (user, assistant). Total turns are therefore
    3 + 2*extra_turn_pairs - 1.

    Backend failures raise ExtensionError with reason "transport" or
    "empty_completion"; the input conversation is never mutated, so a failed
    extension leaves no partial transcript behind.
    """
    if len(conv.turns) != 3:
        raise ValueError("extension expects the 3-turn scaffold")
    if extra_turn_pairs < 1:
        raise ValueError("extra_turn_pairs must be >= 1")

    turns = list(conv.turns)

    def _complete(backend: ChatBackend, role: str) -> Turn:
        messages = [{"role": t.role, "content": t.text} for t in turns]
        try:
            text = backend.complete(messages, role_hint=role)
        except BackendError as exc:
            raise ExtensionError("transport", str(exc)) from exc
        if not text or not text.strip():
            raise ExtensionError("empty_completion", f"{backend.name} returned an empty {role} turn")
        return Turn(role, text)

    turns.append(_complete(assistant_backend, "assistant"))
    for _ in range(extra_turn_pairs - 1):
        turns.append(_complete(user_backend, "user"))
        turns.append(_complete(assistant_backend, "assistant"))
    generator = f"user={user_backend.name},assistant={assistant_backend.name}"
    return Conversation(turns=turns, origin=conv.origin, generator=generator)


@dataclass
class FailedConversation:
    origin: str
    reason: str
    detail: str = ""


def generate_conversations(
    examples: Iterable[LabeledExample],
    user_backend: ChatBackend,
    assistant_backend: ChatBackend,
    extra_turn_pairs: int = 2,
    templates: Optional[Dict[str, ScaffoldTemplate]] = None,
    concurrency: int = 4,
) -> Tuple[List[Conversation], List[FailedConversation]]:
    """Scaffold and extend every example, with backend calls fanned out over
    a thread pool. Output order matches input order; failures are collected,
    never raised."""
    example_list = list(examples)

    def _one(ex: LabeledExample):
        conv = scaffold_conversation(ex, templates)
        return extend_conversation(conv, user_backend, assistant_backend, extra_turn_pairs)

    conversations: List[Conversation] = []
    failures: List[FailedConversation] = []
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        futures = [(ex, pool.submit(_one, ex)) for ex in example_list]
        for ex, fut in futures:
            try:
                conversations.append(fut.result())
            except ExtensionError as exc:
                failures.append(FailedConversation(origin=ex.id, reason=exc.reason, detail=str(exc)))
            except TemplateError as exc:
                failures.append(FailedConversation(origin=ex.id, reason="missing_template", detail=str(exc)))
    return conversations, failures


# -- decontamination ----------------------------------------------------------


def _shingles(text: str, n: int) -> Set[Tuple[str, ...]]:
    tokens = normalize_text(text).split()
    if len(tokens) < n:
        return set()
    return {tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)}


def decontaminate(
    conversations: Iterable[Conversation],
    benchmark_texts: Iterable[str],
    shingle_n: int = DECONTAMINATION_SHINGLE_N,
) -> Tuple[List[Conversation], int]:
    """Drop any conversation sharing an n-token shingle with a benchmark
    input (exact overlap on normalized whitespace tokens). Benchmark texts
    shorter than one shingle cannot match and are ignored."""
    benchmark_shingles: Set[Tuple[str, ...]] = set()
    for text in benchmark_texts:
        benchmark_shingles |= _shingles(text, shingle_n)
    kept: List[Conversation] = []
    removed = 0
    for conv in conversations:
        contaminated = any(
            _shingles(turn.text, shingle_n) & benchmark_shingles for turn in conv.turns
        )
        if contaminated:
            removed += 1
        else:
            kept.append(conv)
    return kept, removed


# -- serialization ------------------------------------------------------------


def conversation_to_json(conv: Conversation) -> str:
    payload = {
        "origin": conv.origin,
        "generator": conv.generator,
        "turns": [{"role": t.role, "text": t.text} for t in conv.turns],
    }
    return json.dumps(payload, ensure_ascii=False, sort_keys=True)


def write_conversations(conversations: Iterable[Conversation], path: str | Path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for conv in conversations:
            fh.write(conversation_to_json(conv))
            fh.write("\n")
            count += 1
    return count


def read_conversations(path: str | Path) -> List[Conversation]:
    out: List[Conversation] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            payload = json.loads(line)
            turns = [Turn(t["role"], t["text"]) for t in payload["turns"]]
            out.append(
                Conversation(
                    turns=turns,
                    origin=payload["origin"],
                    generator=payload.get("generator", "scaffold"),
                )
            )
    return out


def load_examples(path: str | Path) -> List[LabeledExample]:
    """Read labeled examples from JSONL with fields id, input_text, label,
    optional meta (flat string map) and task_type."""
    out: List[LabeledExample] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
                out.append(
                    LabeledExample(
                        id=str(payload["id"]),
                        input_text=payload["input_text"],
                        label=payload["label"],
                        meta=dict(payload.get("meta", {})),
                        task_type=payload.get("task_type", "classification"),
                    )
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad labeled example: {exc}") from exc
    return out


def conversations_to_documents(
    conversations: Iterable[Conversation], source_name: str = "instruction"
) -> List[Document]:
    """Flatten conversations into corpus documents (one per conversation) so
    the mix assembler can blend instruction data into a pretraining mix."""
    source = resolve_source(source_name)
    docs: List[Document] = []
    for conv in conversations:
        text = "\n\n".join(f"{t.role}: {t.text}" for t in conv.turns)
        docs.append(
            Document(
                id=f"instr-{conv.origin}",
                source=source,
                text=text,
                meta={"turns": str(len(conv.turns)), "generator": conv.generator},
            )
        )
    return docs

"""Multi-turn session state: pending clarifications and their resolution.

A session holds at most one pending clarification. The user resolves it by
clicking an option (the option label becomes the clarification) or by
answering in free text (one backend call rewrites the exchange into a
standalone query). A failed resolution leaves the session untouched.
"""

from __future__ import annotations

import enum
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

from .backend import CompletionBackend, CompletionRequest
from .errors import (
    EmptyQuery,
    InvariantViolation,
    MalformedResponse,
    NoPending,
    UnknownOption,
)
from .model import (
    ChatTurn,
    ClarificationOption,
    DisambiguationResult,
    Query,
    Role,
    validate_query,
)
from .textutil import splice_bytes

logger = logging.getLogger(__name__)

DEFAULT_SESSION_TTL_S = 30 * 60.0

QUALIFIER_TEMPLATE = "{text} — regarding {label}"

RESOLVE_REWRITE_TEMPLATE = """\
A query was ambiguous, the assistant asked a clarification question, and the
user answered. Combine all three into one standalone, unambiguous query.
Return only the rewritten query.

Original query: {original}
Clarification question: {question}
User answer: {answer}

Rewritten query:"""


class Provenance(enum.Enum):
    OPTION_CLICK = "option_click"
    FREE_TEXT = "free_text"


@dataclass(frozen=True)
class PendingClarification:
    """The question a session is waiting on, with its clickable options."""

    original_query: Query
    question: str
    options: tuple[ClarificationOption, ...] = ()
    ambiguous_span: Optional[tuple[int, int]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "options", tuple(self.options))
        if self.ambiguous_span is not None:
            object.__setattr__(self, "ambiguous_span", tuple(self.ambiguous_span))
            start, end = self.ambiguous_span
            text_bytes = len(self.original_query.text.encode("utf-8"))
            if not (0 <= start < end <= text_bytes):
                raise InvariantViolation(
                    f"ambiguous_span {self.ambiguous_span} invalid for query of {text_bytes} bytes"
                )
        ids = [o.option_id for o in self.options]
        if len(ids) != len(set(ids)):
            raise InvariantViolation("pending options must have unique ids")

    def to_dict(self) -> dict[str, Any]:
        return {
            "original_query": self.original_query.to_dict(),
            "question": self.question,
            "options": [o.to_dict() for o in self.options],
            "ambiguous_span": list(self.ambiguous_span) if self.ambiguous_span else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PendingClarification":
        return cls(
            original_query=Query.from_dict(d["original_query"]),
            question=d["question"],
            options=tuple(ClarificationOption.from_dict(o) for o in d.get("options", ())),
            ambiguous_span=tuple(d["ambiguous_span"]) if d.get("ambiguous_span") else None,
        )


@dataclass(frozen=True)
class ResolvedQuery:
    """A standalone query produced by resolving a pending clarification."""

    text: str
    provenance: Provenance
    source_option: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise InvariantViolation("resolved query text must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "provenance": self.provenance.value,
            "source_option": self.source_option,
        }


@dataclass
class Session:
    """One conversation: its turns and at most one pending clarification."""

    session_id: str
    turns: list[ChatTurn] = field(default_factory=list)
    pending: Optional[PendingClarification] = None

    def append_turn(self, role: Role, text: str) -> ChatTurn:
        turn = ChatTurn(role=role, text=text, index=len(self.turns))
        self.turns.append(turn)
        return turn

    def last_user_text(self) -> Optional[str]:
        for turn in reversed(self.turns):
            if turn.role is Role.USER:
                return turn.text
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "turns": [t.to_dict() for t in self.turns],
            "pending": self.pending.to_dict() if self.pending else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Session":
        return cls(
            session_id=d["session_id"],
            turns=[ChatTurn.from_dict(t) for t in d.get("turns", ())],
            pending=PendingClarification.from_dict(d["pending"]) if d.get("pending") else None,
        )


def _shared_span(result: DisambiguationResult) -> Optional[tuple[int, int]]:
    """The single span behind all options, if there is exactly one."""
    wanted = {(o.payload.ref_id, o.payload.kind) for o in result.options}
    spans = {
        m.surface_span
        for r in result.agent_reports
        for m in r.matches
        if (m.ref_id, m.kind) in wanted
    }
    return next(iter(spans)) if len(spans) == 1 else None


def record_pending(
    session: Session, result: DisambiguationResult, query: Optional[Query] = None
) -> Session:
    """Store an ambiguous result as the session's pending clarification.

    Appends the assistant's question to the transcript. A new ambiguous
    result while one is pending replaces the old one (the user changed
    topic); that replacement is logged.
    """
    if not result.decision.ambiguous or not result.decision.clarification_question:
        raise InvariantViolation("record_pending requires an ambiguous decision")
    if query is None:
        last = session.last_user_text()
        if last is None:
            raise InvariantViolation("session has no user turn to take the original query from")
        query = validate_query(last, session.session_id)
    if session.pending is not None:
        logger.warning(
            "session %s already had a pending clarification; replacing it", session.session_id
        )
    session.pending = PendingClarification(
        original_query=query,
        question=result.decision.clarification_question,
        options=result.options,
        ambiguous_span=_shared_span(result),
    )
    session.append_turn(Role.ASSISTANT, result.decision.clarification_question)
    return session


def resolve_with_option(session: Session, option_id: str) -> ResolvedQuery:
    """Resolve the pending clarification from a clicked option.

    With a known ambiguous span the option label is spliced over it
    ("what is TEST" -> "what is TEST (dataset)"); otherwise the label is
    appended as a qualifier. Clears the pending state.
    """
    pending = session.pending
    if pending is None:
        raise NoPending(f"session {session.session_id} has no pending clarification")
    option = next((o for o in pending.options if o.option_id == option_id), None)
    if option is None:
        raise UnknownOption(f"option {option_id!r} is not part of the pending clarification")

    if pending.ambiguous_span is not None:
        text = splice_bytes(pending.original_query.text, pending.ambiguous_span, option.label)
    else:
        text = QUALIFIER_TEMPLATE.format(text=pending.original_query.text, label=option.label)

    session.pending = None
    session.append_turn(Role.USER, option.label)
    return ResolvedQuery(text=text, provenance=Provenance.OPTION_CLICK, source_option=option_id)


def resolve_with_text(session: Session, answer: str, backend: CompletionBackend) -> ResolvedQuery:
    """Resolve the pending clarification from a free-text answer.

    One backend call rewrites (original query, question, answer) into a
    standalone query. On backend failure the pending state is preserved.
    """
    pending = session.pending
    if pending is None:
        raise NoPending(f"session {session.session_id} has no pending clarification")
    if not answer.strip():
        raise EmptyQuery("clarification answer is empty")

    prompt = RESOLVE_REWRITE_TEMPLATE.format(
        original=pending.original_query.text,
        question=pending.question,
        answer=answer.strip(),
    )
    raw = backend.complete(CompletionRequest(prompt=prompt))
    rewritten = raw.strip()
    if not rewritten:
        raise MalformedResponse("rewrite for clarification answer came back empty")

    session.pending = None
    session.append_turn(Role.USER, answer.strip())
    return ResolvedQuery(text=rewritten, provenance=Provenance.FREE_TEXT)


@dataclass
class _Slot:
    session: Session
    lock: threading.Lock
    last_active: float


class SessionStore:
    """In-memory session map with idle expiry and optional JSON snapshots.

    Per-session operations are serialized through ``lock``; different
    sessions proceed concurrently. Sessions idle longer than the TTL are
    dropped lazily on the next access.
    """

    def __init__(
        self,
        ttl_seconds: float = DEFAULT_SESSION_TTL_S,
        snapshot_dir: Optional[str | Path] = None,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.ttl_seconds = ttl_seconds
        self.snapshot_dir = Path(snapshot_dir) if snapshot_dir else None
        self._clock = clock
        self._slots: dict[str, _Slot] = {}
        self._map_lock = threading.Lock()

    def _purge_expired(self) -> None:
        now = self._clock()
        expired = [
            sid for sid, slot in self._slots.items() if now - slot.last_active > self.ttl_seconds
        ]
        for sid in expired:
            del self._slots[sid]

    def get_or_create(self, session_id: str) -> Session:
        with self._map_lock:
            self._purge_expired()
            slot = self._slots.get(session_id)
            if slot is None:
                slot = _Slot(Session(session_id=session_id), threading.Lock(), self._clock())
                self._slots[session_id] = slot
            slot.last_active = self._clock()
            return slot.session

    def get(self, session_id: str) -> Optional[Session]:
        with self._map_lock:
            self._purge_expired()
            slot = self._slots.get(session_id)
            if slot is None:
                return None
            slot.last_active = self._clock()
            return slot.session

    def lock(self, session_id: str) -> threading.Lock:
        with self._map_lock:
            slot = self._slots.get(session_id)
            if slot is None:
                raise KeyError(session_id)
            return slot.lock

    def save_snapshot(self, session: Session) -> Optional[Path]:
        """Write the session's canonical JSON next to its peers, if configured."""
        if self.snapshot_dir is None:
            return None
        self.snapshot_dir.mkdir(parents=True, exist_ok=True)
        path = self.snapshot_dir / f"{session.session_id}.json"
        path.write_text(
            json.dumps(session.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False),
            encoding="utf-8",
        )
        return path

    def load_snapshot(self, session_id: str) -> Optional[Session]:
        if self.snapshot_dir is None:
            return None
        path = self.snapshot_dir / f"{session_id}.json"
        if not path.exists():
            return None
        return Session.from_dict(json.loads(path.read_text(encoding="utf-8")))

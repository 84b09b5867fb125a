"""Shared domain types: queries, agent reports, decisions, results.

Every type here is an immutable value object with its invariants checked at
construction, plus a canonical JSON encoding (snake_case keys, sorted, compact)
used as the wire format of the HTTP service and the fixture format of tests.
No behavior beyond validation lives in this module.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Mapping, Optional, Sequence

from .errors import EmptyQuery, InvariantViolation


class Role(enum.Enum):
    USER = "user"
    ASSISTANT = "assistant"


class AmbiguityType(enum.Enum):
    """The three query-ambiguity categories agents may report."""

    CONTEXTUAL = "contextual"
    SYNTACTIC = "syntactic"
    ALEATORIC = "aleatoric"


class SurfaceMode(enum.Enum):
    """How a clarification is presented: ask up front, or answer first."""

    ASK_FIRST = "ask_first"
    ANSWER_FIRST = "answer_first"


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class Query:
    """One user query within a session. ``received_at`` is informational only."""

    text: str
    session_id: str
    received_at: datetime = field(default_factory=_utcnow)

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise EmptyQuery("query text is empty after trimming")
        if self.text != self.text.strip():
            raise InvariantViolation("query text must be pre-trimmed; use validate_query")

    def to_dict(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "session_id": self.session_id,
            "received_at": self.received_at.isoformat(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Query":
        return cls(
            text=d["text"],
            session_id=d["session_id"],
            received_at=datetime.fromisoformat(d["received_at"]),
        )


def validate_query(raw: str, session_id: str) -> Query:
    """Trim and wrap raw input; rejects empty or whitespace-only text."""
    text = raw.strip()
    if not text:
        raise EmptyQuery("query text is empty after trimming")
    return Query(text=text, session_id=session_id)


@dataclass(frozen=True)
class ChatTurn:
    """One turn of the conversation; indices count from 0 within a history."""

    role: Role
    text: str
    index: int

    def __post_init__(self) -> None:
        if self.index < 0:
            raise InvariantViolation("turn index must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {"role": self.role.value, "text": self.text, "index": self.index}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ChatTurn":
        return cls(role=Role(d["role"]), text=d["text"], index=d["index"])


def validate_history(turns: Sequence[ChatTurn]) -> tuple[ChatTurn, ...]:
    """Check that turn indices run 0, 1, 2, ... and return an immutable copy."""
    for expected, turn in enumerate(turns):
        if turn.index != expected:
            raise InvariantViolation(
                f"history indices must be consecutive from 0; "
                f"got {turn.index} at position {expected}"
            )
    return tuple(turns)


@dataclass(frozen=True)
class MatchCandidate:
    """One knowledge-store record a query span could refer to.

    ``surface_span`` is a (start, end) byte span into the UTF-8 query text.
    """

    surface_span: tuple[int, int]
    label: str
    kind: str
    ref_id: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "surface_span", tuple(self.surface_span))
        start, end = self.surface_span
        if not (0 <= start < end):
            raise InvariantViolation(f"surface_span must satisfy 0 <= start < end, got {self.surface_span}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "surface_span": list(self.surface_span),
            "label": self.label,
            "kind": self.kind,
            "ref_id": self.ref_id,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MatchCandidate":
        return cls(
            surface_span=tuple(d["surface_span"]),
            label=d["label"],
            kind=d["kind"],
            ref_id=d["ref_id"],
        )


@dataclass(frozen=True)
class ConceptDefinition:
    """A domain term with its definition; keywords are stored lowercase."""

    term: str
    definition: str
    keywords: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.term.strip():
            raise InvariantViolation("concept term must be non-empty")
        object.__setattr__(self, "keywords", tuple(k.lower() for k in self.keywords))

    def to_dict(self) -> dict[str, Any]:
        return {"term": self.term, "definition": self.definition, "keywords": list(self.keywords)}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ConceptDefinition":
        return cls(term=d["term"], definition=d["definition"], keywords=tuple(d.get("keywords", ())))


@dataclass(frozen=True)
class AgentReport:
    """One agent's verdict on a query.

    A detecting report either carries >= 2 candidate matches or, when the
    ambiguity has no concrete candidates (e.g. lexical ambiguity), a
    non-empty ``detail``. A single match is not an ambiguity.
    """

    agent_id: str
    agent_description: str
    ambiguity_detected: bool
    ambiguity_type: Optional[AmbiguityType] = None
    detail: str = ""
    matches: tuple[MatchCandidate, ...] = ()
    grounding: tuple[ConceptDefinition, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "matches", tuple(self.matches))
        object.__setattr__(self, "grounding", tuple(self.grounding))
        if not self.agent_description.strip():
            raise InvariantViolation("agent_description must be non-empty")
        if not self.ambiguity_detected and self.matches:
            raise InvariantViolation("matches must be empty when no ambiguity was detected")
        if self.matches and len(self.matches) < 2:
            raise InvariantViolation("a single match is not an ambiguity; need 0 or >= 2 matches")
        if self.ambiguity_detected and not self.matches and not self.detail.strip():
            raise InvariantViolation("a detecting report without matches must carry a detail")
        labels = [m.label for m in self.matches]
        if len(labels) != len(set(labels)):
            raise InvariantViolation("match labels must be unique within one report")

    def to_dict(self) -> dict[str, Any]:
        return {
            "agent_id": self.agent_id,
            "agent_description": self.agent_description,
            "ambiguity_detected": self.ambiguity_detected,
            "ambiguity_type": self.ambiguity_type.value if self.ambiguity_type else None,
            "detail": self.detail,
            "matches": [m.to_dict() for m in self.matches],
            "grounding": [g.to_dict() for g in self.grounding],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "AgentReport":
        return cls(
            agent_id=d["agent_id"],
            agent_description=d["agent_description"],
            ambiguity_detected=d["ambiguity_detected"],
            ambiguity_type=AmbiguityType(d["ambiguity_type"]) if d.get("ambiguity_type") else None,
            detail=d.get("detail", ""),
            matches=tuple(MatchCandidate.from_dict(m) for m in d.get("matches", ())),
            grounding=tuple(ConceptDefinition.from_dict(g) for g in d.get("grounding", ())),
        )


@dataclass(frozen=True)
class LlmDecision:
    """Parsed unified model output: binary verdict plus optional question.

    Invariant: ambiguous is true exactly when a non-empty clarification
    question is present.
    """

    ambiguous: bool
    clarification_question: Optional[str] = None
    referenced_agent_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "referenced_agent_ids", tuple(self.referenced_agent_ids))
        has_question = bool(self.clarification_question and self.clarification_question.strip())
        if self.ambiguous != has_question:
            raise InvariantViolation(
                "ambiguous=true requires a non-empty clarification question, and vice versa"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "ambiguous": self.ambiguous,
            "clarification_question": self.clarification_question,
            "referenced_agent_ids": list(self.referenced_agent_ids),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "LlmDecision":
        return cls(
            ambiguous=d["ambiguous"],
            clarification_question=d.get("clarification_question"),
            referenced_agent_ids=tuple(d.get("referenced_agent_ids", ())),
        )


@dataclass(frozen=True)
class OptionPayload:
    """What a clicked option resolves to in the knowledge store."""

    ref_id: str
    kind: str

    def to_dict(self) -> dict[str, Any]:
        return {"ref_id": self.ref_id, "kind": self.kind}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "OptionPayload":
        return cls(ref_id=d["ref_id"], kind=d["kind"])


@dataclass(frozen=True)
class ClarificationOption:
    """A clickable choice presented with a clarification question."""

    option_id: str
    label: str
    payload: OptionPayload

    def to_dict(self) -> dict[str, Any]:
        return {"option_id": self.option_id, "label": self.label, "payload": self.payload.to_dict()}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ClarificationOption":
        return cls(
            option_id=d["option_id"],
            label=d["label"],
            payload=OptionPayload.from_dict(d["payload"]),
        )


@dataclass(frozen=True)
class DisambiguationResult:
    """What the assistant does with a query: answer, or ask with options."""

    decision: LlmDecision
    options: tuple[ClarificationOption, ...] = ()
    surface_mode: SurfaceMode = SurfaceMode.ASK_FIRST
    llm_calls_used: int = 0
    agent_reports: tuple[AgentReport, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "options", tuple(self.options))
        object.__setattr__(self, "agent_reports", tuple(self.agent_reports))
        if self.llm_calls_used < 0:
            raise InvariantViolation("llm_calls_used must be >= 0")
        if self.options and not self.decision.ambiguous:
            raise InvariantViolation("options are only allowed on an ambiguous decision")
        ids = [o.option_id for o in self.options]
        if len(ids) != len(set(ids)):
            raise InvariantViolation("option_ids must be unique within a result")
        known = {(m.ref_id, m.kind) for r in self.agent_reports for m in r.matches}
        for opt in self.options:
            if (opt.payload.ref_id, opt.payload.kind) not in known:
                raise InvariantViolation(
                    f"option {opt.option_id} does not resolve to any reported match"
                )

    def to_dict(self) -> dict[str, Any]:
        return {
            "decision": self.decision.to_dict(),
            "options": [o.to_dict() for o in self.options],
            "surface_mode": self.surface_mode.value,
            "llm_calls_used": self.llm_calls_used,
            "agent_reports": [r.to_dict() for r in self.agent_reports],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "DisambiguationResult":
        return cls(
            decision=LlmDecision.from_dict(d["decision"]),
            options=tuple(ClarificationOption.from_dict(o) for o in d.get("options", ())),
            surface_mode=SurfaceMode(d["surface_mode"]),
            llm_calls_used=d["llm_calls_used"],
            agent_reports=tuple(AgentReport.from_dict(r) for r in d.get("agent_reports", ())),
        )


def encode(obj: Any) -> str:
    """Canonical JSON: snake_case keys, sorted, compact separators."""
    return json.dumps(obj.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def decode(cls: type, payload: str) -> Any:
    """Inverse of :func:`encode` for any type with ``from_dict``."""
    return cls.from_dict(json.loads(payload))

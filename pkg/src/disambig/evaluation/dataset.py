"""Labeled evaluation examples and their JSONL loader.

One line per example:

    {"example_id": "...", "query": "...",
     "history": [{"role": "user", "text": "...", "index": 0}],
     "rewritten": "..." | null,
     "annotations": [{"needs_clarification": true, "clarification_text": "..."}]}

Each example carries 3, 4, or 5 annotations, reflecting the staged voting
protocol (a 4th annotator on a 2-1 split, a 5th on a 2-2 split).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

from ..errors import DatasetError, InvariantViolation
from ..model import ChatTurn, validate_history


@dataclass(frozen=True)
class Annotation:
    """One annotator's verdict; "no clarification needed" carries no text."""

    needs_clarification: bool
    clarification_text: Optional[str] = None

    def __post_init__(self) -> None:
        has_text = bool(self.clarification_text and self.clarification_text.strip())
        if self.needs_clarification != has_text:
            raise InvariantViolation(
                "needs_clarification=true requires a clarification text, and vice versa"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "needs_clarification": self.needs_clarification,
            "clarification_text": self.clarification_text,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Annotation":
        return cls(
            needs_clarification=d["needs_clarification"],
            clarification_text=d.get("clarification_text"),
        )


@dataclass(frozen=True)
class GoldLabel:
    """Majority-vote outcome; the winning side's questions become gold."""

    needs_clarification: bool
    gold_questions: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "gold_questions", tuple(self.gold_questions))
        if self.needs_clarification != bool(self.gold_questions):
            raise InvariantViolation("gold_questions must be non-empty iff clarification is needed")

    def to_dict(self) -> dict[str, Any]:
        return {
            "needs_clarification": self.needs_clarification,
            "gold_questions": list(self.gold_questions),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "GoldLabel":
        return cls(
            needs_clarification=d["needs_clarification"],
            gold_questions=tuple(d.get("gold_questions", ())),
        )


@dataclass(frozen=True)
class EvalExample:
    """One labeled query with its conversation and 3-5 annotations."""

    example_id: str
    query: str
    history: tuple[ChatTurn, ...] = ()
    rewritten: Optional[str] = None
    annotations: tuple[Annotation, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "history", validate_history(tuple(self.history)))
        object.__setattr__(self, "annotations", tuple(self.annotations))
        if not 3 <= len(self.annotations) <= 5:
            raise InvariantViolation(
                f"example {self.example_id}: expected 3-5 annotations, got {len(self.annotations)}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "example_id": self.example_id,
            "query": self.query,
            "history": [t.to_dict() for t in self.history],
            "rewritten": self.rewritten,
            "annotations": [a.to_dict() for a in self.annotations],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EvalExample":
        return cls(
            example_id=d["example_id"],
            query=d["query"],
            history=tuple(ChatTurn.from_dict(t) for t in d.get("history", ())),
            rewritten=d.get("rewritten"),
            annotations=tuple(Annotation.from_dict(a) for a in d.get("annotations", ())),
        )


def load_dataset(path: str | Path) -> list[EvalExample]:
    """Read a JSONL dataset; reports the first bad line with its number."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    examples = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            examples.append(EvalExample.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, InvariantViolation, TypeError) as exc:
            raise DatasetError(f"{path}: line {lineno}: {exc}") from exc
    seen: set[str] = set()
    for example in examples:
        if example.example_id in seen:
            raise DatasetError(f"{path}: duplicate example_id {example.example_id!r}")
        seen.add(example.example_id)
    return examples

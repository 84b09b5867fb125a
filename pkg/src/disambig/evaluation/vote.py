"""Staged majority vote over 3-5 annotators.

Three annotators label first. A 2-1 split brings in a fourth; a 2-2 split
after that brings in a fifth, whose vote forces a strict majority. The
winning side's clarification texts become the gold questions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

from ..errors import InvalidCount
from .dataset import Annotation, GoldLabel


@dataclass(frozen=True)
class NeedsMoreAnnotations:
    """The vote is not decided yet; ``stage`` is the annotator to add (4 or 5)."""

    stage: int


def _gold(annotations: Sequence[Annotation], needs: bool) -> GoldLabel:
    questions = tuple(
        a.clarification_text
        for a in annotations
        if a.needs_clarification and a.clarification_text
    ) if needs else ()
    return GoldLabel(needs_clarification=needs, gold_questions=questions)


def majority_vote(
    annotations: Sequence[Annotation],
) -> Union[GoldLabel, NeedsMoreAnnotations]:
    """Resolve a gold label, or say which annotator stage is still needed.

    3 annotations: unanimous decides, 2-1 needs a 4th.
    4 annotations: a >= 3 majority decides, 2-2 needs a 5th.
    5 annotations: the strict majority decides.
    """
    n = len(annotations)
    if not 3 <= n <= 5:
        raise InvalidCount(f"expected 3-5 annotations, got {n}")
    yes = sum(1 for a in annotations if a.needs_clarification)
    no = n - yes

    if n == 3:
        if yes == 3 or no == 3:
            return _gold(annotations, yes == 3)
        return NeedsMoreAnnotations(stage=4)
    if n == 4:
        if yes >= 3 or no >= 3:
            return _gold(annotations, yes > no)
        return NeedsMoreAnnotations(stage=5)
    return _gold(annotations, yes > no)

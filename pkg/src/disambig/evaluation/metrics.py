"""Binary decision metrics and ROUGE-L.

"Clarification Needed" is the positive class of the first row and
"Clarification Not Needed" the positive class of the second; the macro row
is the unweighted mean of the two, computed before any rounding. Display
rounding is half-up to 3 decimals; internal comparisons always use the
unrounded values.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Any, Optional, Sequence

from ..errors import EmptyDataset, InvariantViolation, LengthMismatch
from ..textutil import tokenize

CLASS_NEEDED = "clarification_needed"
CLASS_NOT_NEEDED = "clarification_not_needed"


def round_half_up(value: float, places: int = 3) -> float:
    """Half-up decimal rounding for display (0.4375 -> 0.438)."""
    exponent = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(exponent, rounding=ROUND_HALF_UP))


def _harmonic(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float

    def __post_init__(self) -> None:
        for name in ("precision", "recall", "f1"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvariantViolation(f"{name} must be in [0, 1], got {value}")

    def to_dict(self) -> dict[str, float]:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}

    def rounded(self, places: int = 3) -> dict[str, float]:
        return {k: round_half_up(v, places) for k, v in self.to_dict().items()}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def to_dict(self) -> dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class MetricsReport:
    """Aggregate metrics of one evaluation run.

    ``mean_rouge_l`` and ``mean_similarity`` are None until question
    alignment has been computed (they only make sense over examples where
    both sides asked a question).
    """

    per_class: dict[str, ClassMetrics]
    macro: ClassMetrics
    counts: ConfusionCounts
    zero_division: tuple[str, ...] = ()
    mean_rouge_l: Optional[float] = None
    mean_similarity: Optional[float] = None
    n_examples: int = 0
    n_question_pairs: int = 0
    n_failures: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "zero_division", tuple(self.zero_division))
        if self.mean_rouge_l is not None and not 0.0 <= self.mean_rouge_l <= 1.0:
            raise InvariantViolation(f"mean_rouge_l must be in [0, 1], got {self.mean_rouge_l}")
        if self.mean_similarity is not None and not -1.0 <= self.mean_similarity <= 1.0:
            raise InvariantViolation(
                f"mean_similarity must be in [-1, 1], got {self.mean_similarity}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "per_class": {name: m.to_dict() for name, m in self.per_class.items()},
            "macro": self.macro.to_dict(),
            "counts": self.counts.to_dict(),
            "zero_division": list(self.zero_division),
            "mean_rouge_l": self.mean_rouge_l,
            "mean_similarity": self.mean_similarity,
            "n_examples": self.n_examples,
            "n_question_pairs": self.n_question_pairs,
            "n_failures": self.n_failures,
        }

    def display_rows(self) -> list[tuple[str, float, float, float]]:
        """(label, P, R, F1) rows with half-up 3-decimal display rounding."""
        rows = []
        for name, label in ((CLASS_NEEDED, "Clarification Needed"),
                            (CLASS_NOT_NEEDED, "Clarification Not Needed")):
            m = self.per_class[name].rounded()
            rows.append((label, m["precision"], m["recall"], m["f1"]))
        m = self.macro.rounded()
        rows.append(("Average", m["precision"], m["recall"], m["f1"]))
        return rows


def compute_prf(predictions: Sequence[bool], golds: Sequence[bool]) -> MetricsReport:
    """Per-class and macro P/R/F1 for the binary ask/don't-ask decision.

    A class with a zero denominator (no predicted positives, or no actual
    positives) scores 0 there and is flagged in ``zero_division``.
    """
    if len(predictions) != len(golds):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(golds)} golds")
    if not predictions:
        raise EmptyDataset("cannot compute metrics over zero examples")

    tp = sum(1 for p, g in zip(predictions, golds) if p and g)
    fp = sum(1 for p, g in zip(predictions, golds) if p and not g)
    fn = sum(1 for p, g in zip(predictions, golds) if not p and g)
    tn = sum(1 for p, g in zip(predictions, golds) if not p and not g)

    flags: list[str] = []

    def ratio(num: int, den: int, flag: str) -> float:
        if den == 0:
            flags.append(flag)
            return 0.0
        return num / den

    p_needed = ratio(tp, tp + fp, f"{CLASS_NEEDED}.precision")
    r_needed = ratio(tp, tp + fn, f"{CLASS_NEEDED}.recall")
    p_not = ratio(tn, tn + fn, f"{CLASS_NOT_NEEDED}.precision")
    r_not = ratio(tn, tn + fp, f"{CLASS_NOT_NEEDED}.recall")

    needed = ClassMetrics(p_needed, r_needed, _harmonic(p_needed, r_needed))
    not_needed = ClassMetrics(p_not, r_not, _harmonic(p_not, r_not))
    macro = ClassMetrics(
        (needed.precision + not_needed.precision) / 2,
        (needed.recall + not_needed.recall) / 2,
        (needed.f1 + not_needed.f1) / 2,
    )
    return MetricsReport(
        per_class={CLASS_NEEDED: needed, CLASS_NOT_NEEDED: not_needed},
        macro=macro,
        counts=ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn),
        zero_division=tuple(flags),
        n_examples=len(predictions),
    )


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # bottom-up DP, two rows
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> RougeScore:
    """Token-level LCS overlap; tokens are lowercased alphanumeric runs."""
    cand = [t.lower for t in tokenize(candidate)]
    ref = [t.lower for t in tokenize(reference)]
    if not cand or not ref:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = _lcs_length(cand, ref)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return RougeScore(precision, recall, _harmonic(precision, recall))

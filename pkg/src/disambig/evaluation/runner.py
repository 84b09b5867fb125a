"""Run a pipeline over a labeled dataset and score it.

Examples may be processed in parallel; aggregation is order-independent
(outcomes are sorted by example_id before any reduction), so a parallel run
and a sequential run produce identical reports.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from ..agents.base import AgentRegistry
from ..backend import CompletionBackend
from ..errors import DatasetError, EmptyDataset
from ..model import Query
from ..pipeline import (
    DEFAULT_FEWSHOT_EXAMPLES,
    PipelinePolicy,
    disambiguate_baseline,
    disambiguate_unified,
)
from ..store import Store
from .dataset import EvalExample, GoldLabel, load_dataset
from .metrics import MetricsReport, compute_prf, rouge_l
from .similarity import Embedder, HashedProjectionEmbedder, similarity
from .vote import NeedsMoreAnnotations, majority_vote

logger = logging.getLogger(__name__)

PIPELINE_UNIFIED = "unified"
PIPELINE_BASELINE = "baseline"


@dataclass
class EvalConfig:
    """Everything a run needs besides the dataset itself."""

    store: Store
    registry: AgentRegistry
    backend: CompletionBackend
    policy: PipelinePolicy = PipelinePolicy()
    fewshot: tuple[str, ...] = DEFAULT_FEWSHOT_EXAMPLES
    embedder: Embedder = field(default_factory=HashedProjectionEmbedder)
    workers: int = 1


@dataclass(frozen=True)
class ExampleOutcome:
    """Per-example record written to the run's JSONL file."""

    example_id: str
    gold: GoldLabel
    predicted_ambiguous: Optional[bool] = None
    predicted_question: Optional[str] = None
    rouge_l_f1: Optional[float] = None
    similarity: Optional[float] = None
    llm_calls: int = 0
    error: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "example_id": self.example_id,
            "gold": self.gold.to_dict(),
            "predicted_ambiguous": self.predicted_ambiguous,
            "predicted_question": self.predicted_question,
            "rouge_l_f1": self.rouge_l_f1,
            "similarity": self.similarity,
            "llm_calls": self.llm_calls,
            "error": self.error,
        }


def resolve_golds(examples: list[EvalExample]) -> dict[str, GoldLabel]:
    """Majority-vote every example; undecidable votes fail the whole run."""
    golds: dict[str, GoldLabel] = {}
    unresolved: list[str] = []
    for example in examples:
        verdict = majority_vote(example.annotations)
        if isinstance(verdict, NeedsMoreAnnotations):
            unresolved.append(f"{example.example_id} (needs annotator {verdict.stage})")
        else:
            golds[example.example_id] = verdict
    if unresolved:
        raise DatasetError(
            "gold labels are unresolved for: " + ", ".join(unresolved)
        )
    return golds


def _score_questions(
    outcome: ExampleOutcome, embedder: Embedder
) -> ExampleOutcome:
    """Attach ROUGE-L and similarity where both sides asked a question."""
    if not (
        outcome.predicted_ambiguous
        and outcome.predicted_question
        and outcome.gold.needs_clarification
    ):
        return outcome
    best_rouge = max(
        rouge_l(outcome.predicted_question, ref).f1 for ref in outcome.gold.gold_questions
    )
    best_similarity = max(
        similarity(outcome.predicted_question, ref, embedder)
        for ref in outcome.gold.gold_questions
    )
    return dataclasses.replace(outcome, rouge_l_f1=best_rouge, similarity=best_similarity)


def evaluate(
    dataset_path: str | Path, pipeline: str, config: EvalConfig
) -> tuple[MetricsReport, list[ExampleOutcome]]:
    """Score ``pipeline`` ("unified" or "baseline") over a JSONL dataset.

    Per-example pipeline failures are recorded in the outcome and excluded
    from the confusion counts; dataset-level problems (parse errors,
    unresolved golds, empty file) abort the run.
    """
    if pipeline not in (PIPELINE_UNIFIED, PIPELINE_BASELINE):
        raise ValueError(f"unknown pipeline {pipeline!r}")
    examples = load_dataset(dataset_path)
    if not examples:
        raise EmptyDataset(f"dataset {dataset_path} has no examples")
    golds = resolve_golds(examples)

    def run_one(example: EvalExample) -> ExampleOutcome:
        gold = golds[example.example_id]
        query = Query(text=example.query.strip(), session_id=f"eval-{example.example_id}")
        try:
            if pipeline == PIPELINE_UNIFIED:
                outcome = disambiguate_unified(
                    query, example.history, config.store, config.registry,
                    config.backend, config.policy,
                )
            else:
                outcome = disambiguate_baseline(
                    query, example.history, config.backend, config.fewshot, config.policy,
                )
        except Exception as exc:
            logger.warning("example %s failed: %s", example.example_id, exc)
            return ExampleOutcome(example_id=example.example_id, gold=gold, error=str(exc))
        decision = outcome.result.decision
        return _score_questions(
            ExampleOutcome(
                example_id=example.example_id,
                gold=gold,
                predicted_ambiguous=decision.ambiguous,
                predicted_question=decision.clarification_question,
                llm_calls=outcome.result.llm_calls_used,
            ),
            config.embedder,
        )

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(run_one, examples))
    else:
        outcomes = [run_one(example) for example in examples]
    outcomes.sort(key=lambda o: o.example_id)

    scored = [o for o in outcomes if o.error is None]
    if not scored:
        raise EmptyDataset("every example failed; nothing to score")
    report = compute_prf(
        [bool(o.predicted_ambiguous) for o in scored],
        [o.gold.needs_clarification for o in scored],
    )
    pairs = [o for o in scored if o.rouge_l_f1 is not None]
    mean_rouge = sum(o.rouge_l_f1 for o in pairs) / len(pairs) if pairs else 0.0
    mean_sim = sum(o.similarity for o in pairs) / len(pairs) if pairs else 0.0
    report = dataclasses.replace(
        report,
        mean_rouge_l=mean_rouge,
        mean_similarity=mean_sim,
        n_question_pairs=len(pairs),
        n_failures=len(outcomes) - len(scored),
    )
    return report, outcomes

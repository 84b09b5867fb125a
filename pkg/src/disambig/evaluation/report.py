"""Report writers: canonical JSON, per-example JSONL, and a metrics figure.

The report path always produces the figure next to the delimited output, so
one `eval run` leaves report.json, report.examples.jsonl, and report.png side
by side.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Iterable, Optional

from ..errors import DatasetError
from .dataset import GoldLabel
from .metrics import (
    CLASS_NEEDED,
    CLASS_NOT_NEEDED,
    MetricsReport,
    compute_prf,
    rouge_l,
)
from .runner import ExampleOutcome
from .similarity import Embedder, similarity


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_report_json(report: MetricsReport, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_canonical(report.to_dict()) + "\n", encoding="utf-8")
    return path


def write_examples_jsonl(outcomes: Iterable[ExampleOutcome], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for outcome in outcomes:
            fh.write(_canonical(outcome.to_dict()) + "\n")
    return path


def write_gold_jsonl(golds: dict[str, GoldLabel], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for example_id in sorted(golds):
            row = {"example_id": example_id, **golds[example_id].to_dict()}
            fh.write(_canonical(row) + "\n")
    return path


def render_metrics_figure(report: MetricsReport, path: str | Path) -> Path:
    """Grouped P/R/F1 bars per class plus the macro average, saved to a file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = report.display_rows()
    labels = [r[0] for r in rows]
    metric_names = ("Precision", "Recall", "F1")
    width = 0.25

    fig, ax = plt.subplots(figsize=(7, 4))
    for i, name in enumerate(metric_names):
        values = [row[i + 1] for row in rows]
        positions = [x + (i - 1) * width for x in range(len(labels))]
        bars = ax.bar(positions, values, width=width, label=name)
        ax.bar_label(bars, fmt="%.3f", fontsize=8)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.set_ylim(0, 1.1)
    ax.set_ylabel("score")
    ax.set_title(
        f"Clarification decision metrics over {report.n_examples} examples"
    )
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _load_jsonl(path: str | Path) -> list[dict]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    rows = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: line {lineno}: {exc.msg}") from exc
    return rows


def score_prediction_files(
    pred_path: str | Path,
    gold_path: str | Path,
    embedder: Optional[Embedder] = None,
) -> MetricsReport:
    """Score precomputed predictions against gold labels, joined by example_id.

    Predictions: {"example_id", "ambiguous", "clarification_question"?}.
    Golds:       {"example_id", "needs_clarification", "gold_questions"}.
    """
    preds = {row["example_id"]: row for row in _load_jsonl(pred_path)}
    golds = {row["example_id"]: row for row in _load_jsonl(gold_path)}
    missing = sorted(set(golds) - set(preds))
    extra = sorted(set(preds) - set(golds))
    if missing or extra:
        raise DatasetError(
            f"prediction/gold mismatch; missing predictions: {missing}, unknown ids: {extra}"
        )
    if not golds:
        raise DatasetError("gold file has no rows")

    ordered = sorted(golds)
    report = compute_prf(
        [bool(preds[i]["ambiguous"]) for i in ordered],
        [bool(golds[i]["needs_clarification"]) for i in ordered],
    )

    rouge_values: list[float] = []
    sim_values: list[float] = []
    for example_id in ordered:
        pred, gold = preds[example_id], golds[example_id]
        question = pred.get("clarification_question")
        references = gold.get("gold_questions") or []
        if not (pred.get("ambiguous") and question and gold["needs_clarification"] and references):
            continue
        rouge_values.append(max(rouge_l(question, ref).f1 for ref in references))
        if embedder is not None:
            sim_values.append(max(similarity(question, ref, embedder) for ref in references))

    return dataclasses.replace(
        report,
        mean_rouge_l=sum(rouge_values) / len(rouge_values) if rouge_values else 0.0,
        mean_similarity=sum(sim_values) / len(sim_values) if sim_values else 0.0,
        n_question_pairs=len(rouge_values),
    )

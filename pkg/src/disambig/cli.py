"""Command line interface.

    disambig store validate <path>
    disambig eval run --dataset ... --pipeline unified|baseline --backend mock|http --out report.json
    disambig eval vote --dataset ... [--out gold.jsonl]
    disambig eval metrics --pred pred.jsonl --gold gold.jsonl [--out report.json]
    disambig serve --config service.toml

Every eval report path also renders a P/R/F1 figure next to the JSON output.
Exit status is nonzero on any error.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .agents.builtin import default_registry
from .backend import HttpBackend, MockBackend, RuleTable, mock_rules_load
from .config import load_config
from .errors import DisambigError
from .evaluation.dataset import load_dataset
from .evaluation.report import (
    render_metrics_figure,
    score_prediction_files,
    write_examples_jsonl,
    write_gold_jsonl,
    write_report_json,
)
from .evaluation.runner import EvalConfig, evaluate, resolve_golds
from .evaluation.similarity import HashedProjectionEmbedder, OneHotHashEmbedder
from .pipeline import PipelinePolicy
from .store import ConceptGraph, Store, load_store


@click.group()
def main() -> None:
    """Interactive query disambiguation toolkit."""


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


@main.group()
def store() -> None:
    """Knowledge store utilities."""


@store.command("validate")
@click.argument("path", type=click.Path(path_type=Path))
def store_validate(path: Path) -> None:
    """Load a store file and print its counts, or the first error."""
    try:
        loaded = load_store(path)
    except DisambigError as exc:
        _fail(exc)
        return
    counts = loaded.counts()
    click.echo(
        f"ok: {counts['entities']} entities, {counts['products']} products, "
        f"{counts['concepts']} concepts"
    )


@main.group(name="eval")
def eval_group() -> None:
    """Evaluation harness commands."""


def _make_embedder(name: str):
    return OneHotHashEmbedder() if name == "onehot" else HashedProjectionEmbedder()


def _echo_report(report) -> None:
    for label, precision, recall, f1 in report.display_rows():
        click.echo(f"{label:<26} P={precision:.3f} R={recall:.3f} F1={f1:.3f}")
    if report.zero_division:
        click.echo(f"zero-division flags: {', '.join(report.zero_division)}")
    if report.n_question_pairs:
        click.echo(
            f"question alignment over {report.n_question_pairs} pairs: "
            f"ROUGE-L={report.mean_rouge_l:.3f} similarity={report.mean_similarity:.3f}"
        )


@eval_group.command("run")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(path_type=Path))
@click.option("--pipeline", type=click.Choice(["unified", "baseline"]), default="unified")
@click.option("--backend", "backend_kind", type=click.Choice(["mock", "http"]), default="mock")
@click.option("--store", "store_path", type=click.Path(path_type=Path), help="Knowledge store JSON (required for the unified pipeline).")
@click.option("--rules", "rules_path", type=click.Path(path_type=Path), help="Mock backend rule table.")
@click.option("--http-url", help="Chat-completion endpoint for --backend http.")
@click.option("--http-model", help="Model name for --backend http.")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--figure/--no-figure", default=True, help="Render the metrics figure next to the report.")
@click.option("--workers", default=1, show_default=True)
@click.option("--embedder", type=click.Choice(["hashed", "onehot"]), default="hashed")
def eval_run(
    dataset_path: Path,
    pipeline: str,
    backend_kind: str,
    store_path: Path | None,
    rules_path: Path | None,
    http_url: str | None,
    http_model: str | None,
    out_path: Path,
    figure: bool,
    workers: int,
    embedder: str,
) -> None:
    """Run a pipeline over a dataset and write report + JSONL (+ figure)."""
    try:
        if pipeline == "unified" and store_path is None:
            raise DisambigError("--store is required for the unified pipeline")
        knowledge = load_store(store_path) if store_path else Store([], [], ConceptGraph({}))
        if backend_kind == "http":
            if not (http_url and http_model):
                raise DisambigError("--http-url and --http-model are required for --backend http")
            backend = HttpBackend(url=http_url, model=http_model)
        else:
            table = mock_rules_load(rules_path) if rules_path else RuleTable()
            backend = MockBackend(table)
        config = EvalConfig(
            store=knowledge,
            registry=default_registry(),
            backend=backend,
            policy=PipelinePolicy(),
            embedder=_make_embedder(embedder),
            workers=workers,
        )
        report, outcomes = evaluate(dataset_path, pipeline, config)
        write_report_json(report, out_path)
        jsonl_path = out_path.with_suffix(".examples.jsonl")
        write_examples_jsonl(outcomes, jsonl_path)
        click.echo(f"wrote {out_path} and {jsonl_path}")
        if figure:
            figure_path = out_path.with_suffix(".png")
            render_metrics_figure(report, figure_path)
            click.echo(f"wrote {figure_path}")
        _echo_report(report)
    except DisambigError as exc:
        _fail(exc)


@eval_group.command("vote")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_path", type=click.Path(path_type=Path))
def eval_vote(dataset_path: Path, out_path: Path | None) -> None:
    """Resolve gold labels by staged majority vote and emit them as JSONL."""
    try:
        examples = load_dataset(dataset_path)
        golds = resolve_golds(examples)
    except DisambigError as exc:
        _fail(exc)
        return
    if out_path is not None:
        write_gold_jsonl(golds, out_path)
        click.echo(f"wrote {out_path} ({len(golds)} gold labels)")
    else:
        import json

        for example_id in sorted(golds):
            row = {"example_id": example_id, **golds[example_id].to_dict()}
            click.echo(json.dumps(row, sort_keys=True, separators=(",", ":")))


@eval_group.command("metrics")
@click.option("--pred", "pred_path", required=True, type=click.Path(path_type=Path))
@click.option("--gold", "gold_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_path", type=click.Path(path_type=Path))
@click.option("--embedder", type=click.Choice(["hashed", "onehot"]), default="hashed")
def eval_metrics(pred_path: Path, gold_path: Path, out_path: Path | None, embedder: str) -> None:
    """Score precomputed predictions against gold labels."""
    try:
        report = score_prediction_files(pred_path, gold_path, _make_embedder(embedder))
    except DisambigError as exc:
        _fail(exc)
        return
    if out_path is not None:
        write_report_json(report, out_path)
        render_metrics_figure(report, out_path.with_suffix(".png"))
        click.echo(f"wrote {out_path} and {out_path.with_suffix('.png')}")
    _echo_report(report)


@main.command("serve")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
def serve(config_path: Path) -> None:
    """Run the HTTP service described by a TOML config file."""
    import uvicorn

    from .service import create_app

    try:
        config = load_config(config_path)
        app = create_app(config)
    except DisambigError as exc:
        _fail(exc)
        return
    uvicorn.run(app, host=config.host, port=config.port)


if __name__ == "__main__":
    main()

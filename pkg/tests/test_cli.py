from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from disambig.cli import main

from conftest import FIXTURES


@pytest.fixture()
def runner():
    return CliRunner()


class TestStoreValidate:
    def test_valid_store_prints_counts(self, runner):
        result = runner.invoke(main, ["store", "validate", str(FIXTURES / "store.json")])
        assert result.exit_code == 0
        assert "7 entities, 3 products, 10 concepts" in result.output

    def test_broken_store_prints_first_error(self, runner, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"entities": [{"name": "X"}]}')
        result = runner.invoke(main, ["store", "validate", str(path)])
        assert result.exit_code == 1
        assert "ref_id" in result.output

    def test_missing_file(self, runner):
        result = runner.invoke(main, ["store", "validate", "no/such/file.json"])
        assert result.exit_code == 1


class TestEvalVote:
    def test_emits_gold_jsonl_to_stdout(self, runner):
        result = runner.invoke(main, ["eval", "vote", "--dataset", str(FIXTURES / "dataset.jsonl")])
        assert result.exit_code == 0
        rows = [json.loads(line) for line in result.output.splitlines() if line.startswith("{")]
        assert len(rows) == 20
        by_id = {row["example_id"]: row for row in rows}
        assert by_id["e01"]["needs_clarification"] is True
        assert len(by_id["e01"]["gold_questions"]) == 3
        assert by_id["e13"]["needs_clarification"] is False

    def test_writes_file(self, runner, tmp_path):
        out = tmp_path / "gold.jsonl"
        result = runner.invoke(
            main, ["eval", "vote", "--dataset", str(FIXTURES / "dataset.jsonl"), "--out", str(out)]
        )
        assert result.exit_code == 0
        assert len(out.read_text().splitlines()) == 20

    def test_unresolved_dataset_exits_nonzero(self, runner, tmp_path):
        example = {
            "example_id": "x1",
            "query": "q",
            "history": [],
            "rewritten": None,
            "annotations": [
                {"needs_clarification": True, "clarification_text": "Q?"},
                {"needs_clarification": True, "clarification_text": "Q?"},
                {"needs_clarification": False, "clarification_text": None},
            ],
        }
        path = tmp_path / "open.jsonl"
        path.write_text(json.dumps(example) + "\n")
        result = runner.invoke(main, ["eval", "vote", "--dataset", str(path)])
        assert result.exit_code == 1
        assert "needs annotator 4" in result.output


class TestEvalRun:
    def test_writes_report_jsonl_and_figure(self, runner, tmp_path):
        out = tmp_path / "report.json"
        result = runner.invoke(main, [
            "eval", "run",
            "--dataset", str(FIXTURES / "dataset.jsonl"),
            "--pipeline", "unified",
            "--backend", "mock",
            "--store", str(FIXTURES / "store.json"),
            "--rules", str(FIXTURES / "mock_rules.json"),
            "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        assert out.exists()
        assert out.with_suffix(".examples.jsonl").exists()
        assert out.with_suffix(".png").exists()
        report = json.loads(out.read_text())
        assert report["counts"] == {"tp": 10, "fp": 2, "fn": 2, "tn": 6}
        assert "Clarification Needed" in result.output

    def test_no_figure_flag(self, runner, tmp_path):
        out = tmp_path / "report.json"
        result = runner.invoke(main, [
            "eval", "run",
            "--dataset", str(FIXTURES / "dataset.jsonl"),
            "--store", str(FIXTURES / "store.json"),
            "--rules", str(FIXTURES / "mock_rules.json"),
            "--out", str(out),
            "--no-figure",
        ])
        assert result.exit_code == 0, result.output
        assert not out.with_suffix(".png").exists()

    def test_unified_without_store_fails(self, runner, tmp_path):
        result = runner.invoke(main, [
            "eval", "run",
            "--dataset", str(FIXTURES / "dataset.jsonl"),
            "--out", str(tmp_path / "r.json"),
        ])
        assert result.exit_code == 1
        assert "--store" in result.output

    def test_baseline_pipeline_runs(self, runner, tmp_path):
        out = tmp_path / "baseline.json"
        result = runner.invoke(main, [
            "eval", "run",
            "--dataset", str(FIXTURES / "dataset.jsonl"),
            "--pipeline", "baseline",
            "--rules", str(FIXTURES / "mock_rules.json"),
            "--out", str(out),
            "--no-figure",
        ])
        assert result.exit_code == 0, result.output
        rows = [json.loads(l) for l in out.with_suffix(".examples.jsonl").read_text().splitlines()]
        assert all(row["llm_calls"] in (2, 3) for row in rows)


class TestEvalMetrics:
    def test_scores_precomputed_predictions(self, runner, tmp_path):
        gold = tmp_path / "gold.jsonl"
        runner.invoke(
            main, ["eval", "vote", "--dataset", str(FIXTURES / "dataset.jsonl"), "--out", str(gold)]
        )
        pred = tmp_path / "pred.jsonl"
        with pred.open("w") as fh:
            for line in gold.read_text().splitlines():
                row = json.loads(line)
                fh.write(json.dumps({
                    "example_id": row["example_id"],
                    "ambiguous": row["needs_clarification"],
                    "clarification_question": row["gold_questions"][0] if row["gold_questions"] else None,
                }) + "\n")
        out = tmp_path / "metrics.json"
        result = runner.invoke(main, [
            "eval", "metrics", "--pred", str(pred), "--gold", str(gold), "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert report["macro"]["f1"] == 1.0  # predictions copied from gold
        assert out.with_suffix(".png").exists()

    def test_mismatched_ids_fail(self, runner, tmp_path):
        gold = tmp_path / "gold.jsonl"
        gold.write_text('{"example_id": "a", "needs_clarification": false, "gold_questions": []}\n')
        pred = tmp_path / "pred.jsonl"
        pred.write_text('{"example_id": "b", "ambiguous": false}\n')
        result = runner.invoke(main, ["eval", "metrics", "--pred", str(pred), "--gold", str(gold)])
        assert result.exit_code == 1

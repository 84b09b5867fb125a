from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from disambig.backend import (
    CompletionRequest,
    HttpBackend,
    MockBackend,
    MockRule,
    RuleTable,
    mock_rules_load,
)
from disambig.errors import (
    BackendTimeout,
    BackendUnavailable,
    InvariantViolation,
    MalformedResponse,
    ParseError,
)


class TestCompletionRequest:
    def test_empty_prompt_rejected(self):
        with pytest.raises(InvariantViolation):
            CompletionRequest(prompt="")

    def test_temperature_range(self):
        with pytest.raises(InvariantViolation):
            CompletionRequest(prompt="p", temperature=2.5)

    def test_max_tokens_positive(self):
        with pytest.raises(InvariantViolation):
            CompletionRequest(prompt="p", max_tokens=0)


class TestMockBackend:
    def test_rule_table_is_the_oracle(self, rules_path):
        # The fixture table defines expected outputs; replay it directly.
        table_json = json.loads(rules_path.read_text())
        backend = MockBackend(mock_rules_load(rules_path))
        for rule in table_json["rules"]:
            prompt = f"preamble\n{rule['pattern']}\ntrailer"
            assert backend.complete(CompletionRequest(prompt=prompt)) == rule["response"]

    def test_entity_pattern_yields_ambiguous_decision(self, mock_backend):
        raw = mock_backend.complete(
            CompletionRequest(prompt="Ambiguity Detected: True\nMatches: TEST can be linked to x, y")
        )
        assert json.loads(raw)["ambiguous"] is True

    def test_default_when_no_rule_matches(self, mock_backend):
        raw = mock_backend.complete(CompletionRequest(prompt="nothing relevant"))
        assert json.loads(raw) == {
            "ambiguous": False,
            "clarification_question": None,
            "referenced_agents": [],
        }

    def test_first_match_wins(self):
        table = RuleTable(
            rules=(MockRule("alpha", "first"), MockRule("alpha beta", "second")),
            default="none",
        )
        backend = MockBackend(table)
        assert backend.complete(CompletionRequest(prompt="alpha beta")) == "first"

    def test_deterministic_across_reloads(self, rules_path):
        prompts = ["TEST can be linked to a, b", "unmatched", "is a bare token"]
        first = [MockBackend(mock_rules_load(rules_path)).complete(CompletionRequest(prompt=p)) for p in prompts]
        second = [MockBackend(mock_rules_load(rules_path)).complete(CompletionRequest(prompt=p)) for p in prompts]
        assert first == second

    def test_stats_count_every_call(self, mock_backend):
        for i in range(5):
            mock_backend.complete(CompletionRequest(prompt=f"p{i}"))
        assert mock_backend.stats.total_calls == 5


class TestMockRulesLoad:
    def test_bad_json(self, tmp_path):
        path = tmp_path / "rules.json"
        path.write_text("{nope")
        with pytest.raises(ParseError):
            mock_rules_load(path)

    def test_missing_fields(self, tmp_path):
        path = tmp_path / "rules.json"
        path.write_text(json.dumps({"rules": [{"pattern": "x"}]}))
        with pytest.raises(ParseError, match=r"rules\[0\]"):
            mock_rules_load(path)

    def test_default_falls_back_to_unambiguous(self, tmp_path):
        path = tmp_path / "rules.json"
        path.write_text(json.dumps({"rules": []}))
        table = mock_rules_load(path)
        assert json.loads(table.default)["ambiguous"] is False


def _serve(handler_cls) -> tuple[HTTPServer, str]:
    server = HTTPServer(("127.0.0.1", 0), handler_cls)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, f"http://127.0.0.1:{server.server_port}/v1/chat"


class _SilentHandler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass


class TestHttpBackend:
    def test_unreachable_host(self):
        backend = HttpBackend(url="http://127.0.0.1:1/v1/chat", model="m", timeout_s=2.0)
        with pytest.raises(BackendUnavailable):
            backend.complete(CompletionRequest(prompt="hello"))
        assert backend.stats.total_calls == 1  # failed calls count too

    def test_happy_path_and_auth_header(self, monkeypatch):
        seen = {}

        class Handler(_SilentHandler):
            def do_POST(self):
                length = int(self.headers["Content-Length"])
                seen["body"] = json.loads(self.rfile.read(length))
                seen["auth"] = self.headers.get("Authorization")
                payload = json.dumps({"choices": [{"message": {"content": "fine."}}]})
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.end_headers()
                self.wfile.write(payload.encode())

        server, url = _serve(Handler)
        try:
            monkeypatch.setenv("DISAMBIG_API_KEY", "sekret")
            backend = HttpBackend(url=url, model="test-model", timeout_s=5.0)
            out = backend.complete(CompletionRequest(prompt="hello", max_tokens=7, temperature=0.0))
        finally:
            server.shutdown()
        assert out == "fine."
        assert seen["auth"] == "Bearer sekret"
        assert seen["body"]["model"] == "test-model"
        assert seen["body"]["messages"] == [{"role": "user", "content": "hello"}]
        assert seen["body"]["max_tokens"] == 7

    def test_malformed_payload(self):
        class Handler(_SilentHandler):
            def do_POST(self):
                self.send_response(200)
                self.end_headers()
                self.wfile.write(b'{"unexpected": "shape"}')

        server, url = _serve(Handler)
        try:
            backend = HttpBackend(url=url, model="m", timeout_s=5.0)
            with pytest.raises(MalformedResponse):
                backend.complete(CompletionRequest(prompt="hello"))
        finally:
            server.shutdown()

    def test_non_200_is_unavailable(self):
        class Handler(_SilentHandler):
            def do_POST(self):
                self.send_response(503)
                self.end_headers()

        server, url = _serve(Handler)
        try:
            backend = HttpBackend(url=url, model="m", timeout_s=5.0)
            with pytest.raises(BackendUnavailable):
                backend.complete(CompletionRequest(prompt="hello"))
        finally:
            server.shutdown()

    def test_timeout(self):
        class Handler(_SilentHandler):
            def do_POST(self):
                time.sleep(1.0)
                self.send_response(200)
                self.end_headers()
                self.wfile.write(b"{}")

        server, url = _serve(Handler)
        try:
            backend = HttpBackend(url=url, model="m", timeout_s=0.2)
            with pytest.raises(BackendTimeout):
                backend.complete(CompletionRequest(prompt="hello"))
        finally:
            server.shutdown()

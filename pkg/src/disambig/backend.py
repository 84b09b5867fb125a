"""Completion backends: a deterministic mock and a generic HTTP client.

Both speak one interface (``complete``) and share call-count instrumentation,
so pipelines can assert exactly how many model calls a run consumed. Failed
calls count too.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, runtime_checkable

import httpx

from .errors import (
    BackendTimeout,
    BackendUnavailable,
    InvariantViolation,
    MalformedResponse,
    ParseError,
)

DEFAULT_UNAMBIGUOUS_RESPONSE = json.dumps(
    {"ambiguous": False, "clarification_question": None, "referenced_agents": []}
)


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = 512
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.prompt:
            raise InvariantViolation("prompt must be non-empty")
        if self.max_tokens <= 0:
            raise InvariantViolation("max_tokens must be positive")
        if not 0.0 <= self.temperature <= 2.0:
            raise InvariantViolation("temperature must be in [0, 2]")


class BackendStats:
    """Monotonic call and latency counters, safe under concurrent calls."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._total_calls = 0
        self._total_latency_ms = 0.0

    def record(self, latency_ms: float) -> None:
        with self._lock:
            self._total_calls += 1
            self._total_latency_ms += max(0.0, latency_ms)

    @property
    def total_calls(self) -> int:
        with self._lock:
            return self._total_calls

    @property
    def total_latency_ms(self) -> float:
        with self._lock:
            return self._total_latency_ms


@runtime_checkable
class CompletionBackend(Protocol):
    """Anything that can turn a prompt into a completion string."""

    stats: BackendStats

    def complete(self, request: CompletionRequest) -> str: ...


class _InstrumentedBackend:
    """Shared complete() wrapper: every call, failed or not, is counted."""

    def __init__(self) -> None:
        self.stats = BackendStats()

    def complete(self, request: CompletionRequest) -> str:
        started = time.perf_counter()
        try:
            return self._complete(request)
        finally:
            self.stats.record((time.perf_counter() - started) * 1000.0)

    def _complete(self, request: CompletionRequest) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class MockRule:
    """If ``pattern`` occurs in the prompt, answer with ``response``."""

    pattern: str
    response: str


@dataclass(frozen=True)
class RuleTable:
    """Ordered substring rules; first match wins, else the default response."""

    rules: tuple[MockRule, ...] = ()
    default: str = DEFAULT_UNAMBIGUOUS_RESPONSE

    def match(self, prompt: str) -> str:
        for rule in self.rules:
            if rule.pattern in prompt:
                return rule.response
        return self.default


def mock_rules_load(path: str | Path) -> RuleTable:
    """Load a rule table file: {"rules": [{"pattern", "response"}], "default"?}."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read rule table {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("rules", []), list):
        raise ParseError(f"{path}: expected an object with a 'rules' list")
    rules = []
    for i, raw in enumerate(payload.get("rules", [])):
        if "pattern" not in raw or "response" not in raw:
            raise ParseError(f"{path}: rules[{i}] needs 'pattern' and 'response'")
        rules.append(MockRule(pattern=str(raw["pattern"]), response=str(raw["response"])))
    return RuleTable(rules=tuple(rules), default=str(payload.get("default", DEFAULT_UNAMBIGUOUS_RESPONSE)))


class MockBackend(_InstrumentedBackend):
    """Deterministic test double driven by a rule table.

    Identical prompts yield identical completions across process restarts,
    because matching depends only on the table contents.
    """

    def __init__(self, table: RuleTable | None = None):
        super().__init__()
        self.table = table or RuleTable()

    def _complete(self, request: CompletionRequest) -> str:
        return self.table.match(request.prompt)


class HttpBackend(_InstrumentedBackend):
    """Minimal chat-completion client; no provider-specific SDK.

    Request:  POST {url} {"model", "messages": [{"role": "user", "content"}],
                          "temperature", "max_tokens"}
    Response: {"choices": [{"message": {"content": "..."}}]}
    The API key is read from ``api_key_env`` and sent as a Bearer token.
    """

    def __init__(
        self,
        url: str,
        model: str,
        api_key_env: str = "DISAMBIG_API_KEY",
        timeout_s: float = 30.0,
        client: Optional[httpx.Client] = None,
    ):
        super().__init__()
        self.url = url
        self.model = model
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s
        self._client = client or httpx.Client(timeout=timeout_s)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _complete(self, request: CompletionRequest) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        try:
            response = self._client.post(self.url, json=body, headers=self._headers())
        except httpx.TimeoutException as exc:
            raise BackendTimeout(f"no answer from {self.url} within {self.timeout_s}s") from exc
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"cannot reach {self.url}: {exc}") from exc
        if response.status_code != 200:
            raise BackendUnavailable(f"{self.url} answered HTTP {response.status_code}")
        try:
            payload = response.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise MalformedResponse(f"unexpected completion payload from {self.url}: {exc}") from exc
        if not isinstance(content, str):
            raise MalformedResponse(f"completion content is not a string: {content!r}")
        return content

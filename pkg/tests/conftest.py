from __future__ import annotations

from pathlib import Path

import pytest

from disambig.agents.builtin import default_registry
from disambig.backend import BackendStats, BackendUnavailable, MockBackend, mock_rules_load
from disambig.model import Query
from disambig.store import load_store

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def store_path() -> Path:
    return FIXTURES / "store.json"


@pytest.fixture(scope="session")
def rules_path() -> Path:
    return FIXTURES / "mock_rules.json"


@pytest.fixture(scope="session")
def dataset_path() -> Path:
    return FIXTURES / "dataset.jsonl"


@pytest.fixture()
def store(store_path):
    return load_store(store_path)


@pytest.fixture()
def registry():
    return default_registry()


@pytest.fixture()
def mock_backend(rules_path):
    return MockBackend(mock_rules_load(rules_path))


def make_query(text: str, session_id: str = "s1") -> Query:
    return Query(text=text, session_id=session_id)


class GarbageBackend:
    """Answers every prompt with text that contains no decision object."""

    def __init__(self, payload: str = "sure! here you go \x00 <<<not json>>>"):
        self.stats = BackendStats()
        self.payload = payload

    def complete(self, request):
        self.stats.record(0.0)
        return self.payload


class DownBackend:
    """Fails every call, as an unreachable provider would."""

    def __init__(self):
        self.stats = BackendStats()

    def complete(self, request):
        self.stats.record(0.0)
        raise BackendUnavailable("provider is down")

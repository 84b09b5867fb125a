"""Exception hierarchy shared by every disambig module."""

from __future__ import annotations


class DisambigError(Exception):
    """Base class for all errors raised by this package."""


class InvariantViolation(DisambigError, ValueError):
    """A value object was constructed with fields that break its invariants."""


class EmptyQuery(DisambigError, ValueError):
    """Query text is empty or whitespace-only after trimming."""


# --- knowledge store ---

class ParseError(DisambigError):
    """A file (store, rule table, dataset, config) failed to parse.

    The message carries enough context (path, line, field) to locate the
    offending input.
    """


class DuplicateKey(DisambigError):
    """A uniqueness constraint was violated while loading or registering."""


class UnknownRef(DisambigError, KeyError):
    """A ref_id does not resolve to any entity or product."""


# --- agents ---

class AgentFailure(DisambigError):
    """An agent raised while processing a query."""


class AgentTimeout(DisambigError):
    """An agent did not finish within its configured timeout."""


# --- llm backend ---

class BackendError(DisambigError):
    """Base class for completion-backend failures."""


class BackendUnavailable(BackendError):
    """The backend could not be reached."""


class BackendTimeout(BackendError):
    """The backend did not answer in time."""


class MalformedResponse(BackendError):
    """The backend answered with a payload we cannot interpret."""


# --- orchestration ---

class UnparsableDecision(DisambigError):
    """The model output contained no valid decision object."""

    def __init__(self, raw: str):
        super().__init__(f"no valid decision object in model output: {raw!r}")
        self.raw = raw


# --- sessions ---

class NoPending(DisambigError):
    """A resolution was attempted with no pending clarification."""


class UnknownOption(DisambigError):
    """The clicked option_id does not belong to the pending clarification."""


# --- evaluation ---

class InvalidCount(DisambigError, ValueError):
    """An annotation list has a length outside the 3..5 voting protocol."""


class LengthMismatch(DisambigError, ValueError):
    """Prediction and gold sequences have different lengths."""


class EmptyDataset(DisambigError, ValueError):
    """Metrics were requested over zero examples."""


class DatasetError(DisambigError):
    """A dataset file is malformed or its gold labels cannot be resolved."""


class EmbedderUnavailable(DisambigError):
    """The token embedder (e.g. a remote vector service) cannot be used."""


class ConfigError(DisambigError):
    """Service configuration is missing, malformed, or fails validation."""

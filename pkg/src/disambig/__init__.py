"""disambig: interactive query disambiguation.

Pluggable ambiguity agents feed one unified decision pass that either answers
or asks a targeted clarification question; a session engine resolves the
ambiguity from the user's reply; an evaluation harness measures the whole
thing.
"""

from .model import (
    AgentReport,
    AmbiguityType,
    ChatTurn,
    ClarificationOption,
    ConceptDefinition,
    DisambiguationResult,
    LlmDecision,
    MatchCandidate,
    OptionPayload,
    Query,
    Role,
    SurfaceMode,
    validate_history,
    validate_query,
)
from .pipeline import (
    PipelineOutcome,
    PipelinePolicy,
    PromptBundle,
    build_prompt,
    disambiguate_baseline,
    disambiguate_unified,
    parse_decision,
    run_agents,
)
from .session import (
    PendingClarification,
    Provenance,
    ResolvedQuery,
    Session,
    SessionStore,
    record_pending,
    resolve_with_option,
    resolve_with_text,
)
from .store import Entity, ProductEntry, Store, load_store

__version__ = "0.1.0"

__all__ = [
    "AgentReport",
    "AmbiguityType",
    "ChatTurn",
    "ClarificationOption",
    "ConceptDefinition",
    "DisambiguationResult",
    "LlmDecision",
    "MatchCandidate",
    "OptionPayload",
    "Query",
    "Role",
    "SurfaceMode",
    "validate_history",
    "validate_query",
    "PipelineOutcome",
    "PipelinePolicy",
    "PromptBundle",
    "build_prompt",
    "disambiguate_baseline",
    "disambiguate_unified",
    "parse_decision",
    "run_agents",
    "PendingClarification",
    "Provenance",
    "ResolvedQuery",
    "Session",
    "SessionStore",
    "record_pending",
    "resolve_with_option",
    "resolve_with_text",
    "Entity",
    "ProductEntry",
    "Store",
    "load_store",
    "__version__",
]

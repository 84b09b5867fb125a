"""HTTP surface tying the pipeline and sessions together.

Endpoints (all JSON, canonical snake_case):
  POST /v1/query    {session_id, text}                  -> QueryResponse
  POST /v1/clarify  {session_id, option_id|answer_text} -> QueryResponse
  GET  /v1/session/{id}                                 -> Session
  GET  /v1/health                                       -> status + counts

The answer path is a stub template: answering itself is out of scope, but
the response shape carries it so clients get the complete flow.
"""

from __future__ import annotations

import enum
import json
import logging
import time
import uuid
from dataclasses import dataclass
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .agents.base import AgentRegistry
from .agents.builtin import default_registry
from .backend import CompletionBackend, HttpBackend, MockBackend, RuleTable, mock_rules_load
from .config import ServiceConfig
from .errors import (
    BackendError,
    DisambigError,
    EmptyQuery,
    InvariantViolation,
    NoPending,
    UnknownOption,
)
from .model import (
    ClarificationOption,
    DisambiguationResult,
    Query,
    Role,
    SurfaceMode,
    validate_query,
)
from .pipeline import PipelinePolicy, disambiguate_unified
from .session import SessionStore, record_pending, resolve_with_option, resolve_with_text
from .store import Store, load_store

access_logger = logging.getLogger("disambig.access")

ANSWER_TEMPLATE = 'Here is the answer to "{query}".'
ANSWER_FIRST_TEMPLATE = 'Here is the answer to "{query}", assuming you mean {label}.'


class ResponseKind(enum.Enum):
    ANSWER = "answer"
    CLARIFICATION = "clarification"
    ANSWER_WITH_NOTICE = "answer_with_notice"


@dataclass(frozen=True)
class QueryResponse:
    """What the assistant sends back for one query or clarification."""

    kind: ResponseKind
    trace_id: str
    answer_text: Optional[str] = None
    question: Optional[str] = None
    options: tuple[ClarificationOption, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "options", tuple(self.options))
        if self.kind is ResponseKind.CLARIFICATION and not self.question:
            raise InvariantViolation("a clarification response must carry a question")
        if self.kind is ResponseKind.ANSWER_WITH_NOTICE and not (self.answer_text and self.question):
            raise InvariantViolation("answer-with-notice must carry both answer and question")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "trace_id": self.trace_id,
            "answer_text": self.answer_text,
            "question": self.question,
            "options": [o.to_dict() for o in self.options],
        }


class QueryBody(BaseModel):
    session_id: str
    text: str


class ClarifyBody(BaseModel):
    session_id: str
    option_id: Optional[str] = None
    answer_text: Optional[str] = None


def build_backend(config: ServiceConfig) -> CompletionBackend:
    if config.backend_kind == "http":
        return HttpBackend(
            url=config.backend_url or "",
            model=config.backend_model or "",
            api_key_env=config.backend_api_key_env,
        )
    table = mock_rules_load(config.backend_rules_path) if config.backend_rules_path else RuleTable()
    return MockBackend(table)


def build_registry(config: ServiceConfig) -> AgentRegistry:
    disabled = set(config.agents_disabled)
    return default_registry(
        aleatoric_lexicon=config.aleatoric_lexicon,
        entity_fuzzy=config.entity_fuzzy,
        timeout_ms=config.agents_timeout_ms,
        enabled={agent_id: False for agent_id in disabled},
    )


def create_app(
    config: ServiceConfig,
    store: Optional[Store] = None,
    registry: Optional[AgentRegistry] = None,
    backend: Optional[CompletionBackend] = None,
    sessions: Optional[SessionStore] = None,
) -> FastAPI:
    """Wire the service; explicit components override the config (for tests)."""
    config.validate_paths()
    store = store or load_store(config.store_path)
    registry = registry or build_registry(config)
    backend = backend or build_backend(config)
    sessions = sessions or SessionStore(
        ttl_seconds=config.session_ttl_seconds,
        snapshot_dir=config.session_snapshot_dir,
    )
    policy = PipelinePolicy(
        surface=config.surface,
        history_window=config.history_window,
        debug_trace=config.debug_trace,
    )

    app = FastAPI(title="disambig", docs_url=None, redoc_url=None)
    app.state.store = store
    app.state.backend = backend
    app.state.sessions = sessions

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.middleware("http")
    async def access_log(request: Request, call_next):
        trace_id = uuid.uuid4().hex
        request.state.trace_id = trace_id
        started = time.perf_counter()
        response = await call_next(request)
        access_logger.info(
            json.dumps(
                {
                    "method": request.method,
                    "path": request.url.path,
                    "status": response.status_code,
                    "elapsed_ms": round((time.perf_counter() - started) * 1000.0, 3),
                    "trace_id": trace_id,
                }
            )
        )
        response.headers["X-Trace-Id"] = trace_id
        return response

    def error_body(code: str, message: str, trace_id: str) -> dict[str, Any]:
        return {"error": code, "message": message, "trace_id": trace_id}

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        trace_id = getattr(request.state, "trace_id", "")
        return JSONResponse(status_code=400, content=error_body("ValidationError", str(exc), trace_id))

    @app.exception_handler(DisambigError)
    async def on_domain_error(request: Request, exc: DisambigError):
        trace_id = getattr(request.state, "trace_id", "")
        status = 500
        if isinstance(exc, (EmptyQuery, UnknownOption, InvariantViolation)):
            status = 400
        elif isinstance(exc, NoPending):
            status = 409
        elif isinstance(exc, BackendError):
            status = 502
        return JSONResponse(
            status_code=status,
            content=error_body(type(exc).__name__, str(exc), trace_id),
        )

    def respond_for(result: DisambiguationResult, query: Query, session, trace_id: str) -> QueryResponse:
        """Turn a pipeline result into a response, updating the session."""
        decision = result.decision
        if decision.ambiguous and decision.clarification_question:
            if result.surface_mode is SurfaceMode.ANSWER_FIRST and result.options:
                answer = ANSWER_FIRST_TEMPLATE.format(
                    query=query.text, label=result.options[0].label
                )
                session.append_turn(Role.ASSISTANT, answer)
                record_pending(session, result, query=query)
                return QueryResponse(
                    kind=ResponseKind.ANSWER_WITH_NOTICE,
                    trace_id=trace_id,
                    answer_text=answer,
                    question=decision.clarification_question,
                    options=result.options,
                )
            record_pending(session, result, query=query)
            return QueryResponse(
                kind=ResponseKind.CLARIFICATION,
                trace_id=trace_id,
                question=decision.clarification_question,
                options=result.options,
            )
        answer = ANSWER_TEMPLATE.format(query=query.text)
        session.append_turn(Role.ASSISTANT, answer)
        return QueryResponse(kind=ResponseKind.ANSWER, trace_id=trace_id, answer_text=answer)

    @app.post("/v1/query")
    async def post_query(body: QueryBody, request: Request):
        trace_id = request.state.trace_id
        query = validate_query(body.text, body.session_id)
        session = sessions.get_or_create(body.session_id)
        with sessions.lock(body.session_id):
            history = tuple(session.turns)
            session.append_turn(Role.USER, query.text)
            outcome = disambiguate_unified(query, history, store, registry, backend, policy)
            response = respond_for(outcome.result, query, session, trace_id)
            sessions.save_snapshot(session)
        return JSONResponse(content=response.to_dict())

    @app.post("/v1/clarify")
    async def post_clarify(body: ClarifyBody, request: Request):
        trace_id = request.state.trace_id
        if bool(body.option_id) == bool(body.answer_text):
            return JSONResponse(
                status_code=400,
                content=error_body(
                    "BadClarify", "exactly one of option_id or answer_text is required", trace_id
                ),
            )
        session = sessions.get(body.session_id)
        if session is None:
            return JSONResponse(
                status_code=404,
                content=error_body("UnknownSession", f"no session {body.session_id!r}", trace_id),
            )
        with sessions.lock(body.session_id):
            if body.option_id:
                resolved = resolve_with_option(session, body.option_id)
            else:
                resolved = resolve_with_text(session, body.answer_text or "", backend)
            query = validate_query(resolved.text, body.session_id)
            history = tuple(session.turns)
            outcome = disambiguate_unified(query, history, store, registry, backend, policy)
            response = respond_for(outcome.result, query, session, trace_id)
            sessions.save_snapshot(session)
        return JSONResponse(content=response.to_dict())

    @app.get("/v1/session/{session_id}")
    async def get_session(session_id: str, request: Request):
        session = sessions.get(session_id)
        if session is None:
            return JSONResponse(
                status_code=404,
                content=error_body(
                    "UnknownSession", f"no session {session_id!r}", request.state.trace_id
                ),
            )
        return JSONResponse(content=session.to_dict())

    @app.get("/v1/health")
    async def get_health():
        return JSONResponse(
            content={
                "status": "ok",
                "store": store.counts(),
                "backend": config.backend_kind,
            }
        )

    return app

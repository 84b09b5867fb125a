from __future__ import annotations

import json

import pytest

from disambig.agents.builtin import EntityLinkingAgent
from disambig.agents.base import AgentContext
from disambig.backend import MockBackend, MockRule, RuleTable
from disambig.errors import EmptyQuery, InvariantViolation, NoPending, UnknownOption
from disambig.model import (
    AgentReport,
    ClarificationOption,
    DisambiguationResult,
    LlmDecision,
    MatchCandidate,
    OptionPayload,
    Query,
    Role,
)
from disambig.session import (
    PendingClarification,
    Provenance,
    Session,
    SessionStore,
    record_pending,
    resolve_with_option,
    resolve_with_text,
)

from conftest import DownBackend, make_query


def entity_result(query_text: str = "what is TEST") -> DisambiguationResult:
    span = (query_text.index("TEST"), query_text.index("TEST") + 4)
    matches = (
        MatchCandidate(surface_span=span, label="TEST (dataset)", kind="dataset", ref_id="ent-002"),
        MatchCandidate(surface_span=span, label="TEST (segment)", kind="segment", ref_id="ent-001"),
    )
    report = AgentReport(
        agent_id="entity_linking",
        agent_description="links mentions to store entries",
        ambiguity_detected=True,
        detail="TEST can be linked to TEST (dataset), TEST (segment)",
        matches=matches,
    )
    options = tuple(
        ClarificationOption(f"opt-{i+1}", m.label, OptionPayload(m.ref_id, m.kind))
        for i, m in enumerate(matches)
    )
    return DisambiguationResult(
        decision=LlmDecision(
            ambiguous=True,
            clarification_question="Do you mean the dataset or the segment?",
            referenced_agent_ids=("entity_linking",),
        ),
        options=options,
        llm_calls_used=1,
        agent_reports=(report,),
    )


def product_result() -> DisambiguationResult:
    matches = (
        MatchCandidate(surface_span=(0, 5), label="Adobe Workfront", kind="product", ref_id="prd-wf"),
        MatchCandidate(surface_span=(10, 16), label="Adobe Commerce", kind="product", ref_id="prd-com"),
    )
    report = AgentReport(
        agent_id="product",
        agent_description="product collision check",
        ambiguity_detected=True,
        detail="the query matches keywords of 2 products: Adobe Workfront, Adobe Commerce",
        matches=matches,
    )
    options = tuple(
        ClarificationOption(f"opt-{i+1}", m.label, OptionPayload(m.ref_id, m.kind))
        for i, m in enumerate(matches)
    )
    return DisambiguationResult(
        decision=LlmDecision(
            ambiguous=True,
            clarification_question="Which product do you mean?",
            referenced_agent_ids=("product",),
        ),
        options=options,
        llm_calls_used=1,
        agent_reports=(report,),
    )


def pending_session(result=None, text="what is TEST") -> Session:
    session = Session(session_id="s1")
    session.append_turn(Role.USER, text)
    record_pending(session, result or entity_result(text))
    return session


def snapshot(session: Session) -> bytes:
    return json.dumps(session.to_dict(), sort_keys=True).encode()


class TestRecordPending:
    def test_requires_ambiguous_result(self):
        session = Session(session_id="s1")
        session.append_turn(Role.USER, "hello")
        unambiguous = DisambiguationResult(decision=LlmDecision(ambiguous=False))
        with pytest.raises(InvariantViolation):
            record_pending(session, unambiguous)

    def test_sets_pending_and_appends_question_turn(self):
        session = pending_session()
        assert session.pending is not None
        assert session.pending.original_query.text == "what is TEST"
        assert session.pending.ambiguous_span == (8, 12)
        assert session.turns[-1].role is Role.ASSISTANT
        assert session.turns[-1].text == "Do you mean the dataset or the segment?"

    def test_replacement_logs_a_warning(self, caplog):
        session = pending_session()
        session.append_turn(Role.USER, "actually, what is PROD")
        with caplog.at_level("WARNING"):
            record_pending(
                session,
                entity_result(),
                query=Query(text="actually, what is PROD", session_id="s1"),
            )
        assert any("replacing" in r.message for r in caplog.records)
        assert session.pending.original_query.text == "actually, what is PROD"

    def test_spanless_result_has_no_span(self):
        session = Session(session_id="s1")
        session.append_turn(Role.USER, "tasks and storefront")
        record_pending(session, product_result())
        assert session.pending.ambiguous_span is None


class TestResolveWithOption:
    def test_splice_over_span(self):
        session = pending_session()
        resolved = resolve_with_option(session, "opt-1")
        # oracle: manual string surgery on the fixture query
        assert resolved.text == "what is TEST (dataset)"
        assert resolved.provenance is Provenance.OPTION_CLICK
        assert resolved.source_option == "opt-1"
        assert session.pending is None
        assert session.turns[-1].role is Role.USER
        assert session.turns[-1].text == "TEST (dataset)"

    def test_splice_other_option(self):
        session = pending_session()
        assert resolve_with_option(session, "opt-2").text == "what is TEST (segment)"

    def test_spanless_uses_regarding_qualifier(self):
        session = Session(session_id="s1")
        session.append_turn(Role.USER, "tasks and storefront")
        record_pending(session, product_result())
        resolved = resolve_with_option(session, "opt-2")
        # oracle: template applied by hand
        assert resolved.text == "tasks and storefront — regarding Adobe Commerce"

    def test_unknown_option(self):
        session = pending_session()
        before = snapshot(session)
        with pytest.raises(UnknownOption):
            resolve_with_option(session, "opt-99")
        assert snapshot(session) == before

    def test_no_pending(self):
        session = Session(session_id="s1")
        with pytest.raises(NoPending):
            resolve_with_option(session, "opt-1")

    def test_resolution_is_idempotent(self):
        session = pending_session()
        resolve_with_option(session, "opt-1")
        with pytest.raises(NoPending):
            resolve_with_option(session, "opt-1")

    def test_rerun_soundness_on_entity_store(self, store):
        session = pending_session()
        resolved = resolve_with_option(session, "opt-1")
        ctx = AgentContext(query=make_query(resolved.text), history=(), knowledge=store)
        report = EntityLinkingAgent().detect(ctx)
        assert report.ambiguity_detected is False


class TestResolveWithText:
    REWRITE_RULES = RuleTable(
        rules=(
            MockRule(
                pattern="User answer: the orders dataset",
                response="Can you show me the schema of the orders dataset",
            ),
        ),
        default="unrelated",
    )

    def contextual_pending(self) -> Session:
        session = Session(session_id="s1")
        session.append_turn(Role.USER, "Can you show me the schema of this dataset")
        result = DisambiguationResult(
            decision=LlmDecision(
                ambiguous=True,
                clarification_question="Which dataset are you referring to?",
                referenced_agent_ids=("generic",),
            ),
            options=(),
            llm_calls_used=1,
            agent_reports=(),
        )
        record_pending(session, result)
        return session

    def test_rewrites_via_backend(self):
        session = self.contextual_pending()
        backend = MockBackend(self.REWRITE_RULES)
        resolved = resolve_with_text(session, "the orders dataset", backend)
        assert "orders dataset" in resolved.text
        assert resolved.provenance is Provenance.FREE_TEXT
        assert session.pending is None
        assert session.turns[-1].text == "the orders dataset"

    def test_empty_answer_rejected(self):
        session = self.contextual_pending()
        with pytest.raises(EmptyQuery):
            resolve_with_text(session, "   ", MockBackend(self.REWRITE_RULES))

    def test_backend_failure_preserves_pending(self):
        session = self.contextual_pending()
        before = snapshot(session)
        with pytest.raises(Exception):
            resolve_with_text(session, "the orders dataset", DownBackend())
        assert session.pending is not None
        assert snapshot(session) == before

    def test_no_pending(self):
        session = Session(session_id="s1")
        with pytest.raises(NoPending):
            resolve_with_text(session, "whatever", MockBackend(self.REWRITE_RULES))


class TestPendingClarification:
    def test_span_must_fit_query(self):
        query = Query(text="short", session_id="s1")
        with pytest.raises(InvariantViolation):
            PendingClarification(original_query=query, question="Q?", ambiguous_span=(0, 99))

    def test_option_ids_unique(self):
        query = Query(text="what is TEST", session_id="s1")
        opt = ClarificationOption("o1", "x", OptionPayload("r", "k"))
        with pytest.raises(InvariantViolation):
            PendingClarification(original_query=query, question="Q?", options=(opt, opt))


class TestSessionStore:
    def test_get_or_create_and_get(self):
        store = SessionStore()
        session = store.get_or_create("s1")
        assert store.get("s1") is session
        assert store.get("missing") is None

    def test_ttl_expiry_with_fake_clock(self):
        now = [0.0]
        store = SessionStore(ttl_seconds=60.0, clock=lambda: now[0])
        store.get_or_create("s1")
        now[0] = 59.0
        assert store.get("s1") is not None  # refreshes last_active
        now[0] = 200.0
        assert store.get("s1") is None

    def test_snapshot_round_trip(self, tmp_path):
        store = SessionStore(snapshot_dir=tmp_path)
        session = pending_session()
        path = store.save_snapshot(session)
        assert path is not None and path.exists()
        loaded = store.load_snapshot("s1")
        assert loaded.to_dict() == session.to_dict()

    def test_per_session_lock_is_distinct(self):
        store = SessionStore()
        store.get_or_create("a")
        store.get_or_create("b")
        assert store.lock("a") is not store.lock("b")

from __future__ import annotations

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disambig.agents.base import AgentContext, AgentDescriptor, AgentRegistry
from disambig.agents.builtin import (
    ConceptGraphAgent,
    EntityLinkingAgent,
    GenericAmbiguityAgent,
    ProductAmbiguityAgent,
    default_registry,
)
from disambig.errors import InvariantViolation
from disambig.model import AmbiguityType, ChatTurn, Query, Role
from disambig.store import ConceptGraph, Entity, ProductEntry, Store
from disambig.textutil import span_text, tokenize

from conftest import make_query


def ctx_for(text: str, store=None, history=()) -> AgentContext:
    return AgentContext(query=make_query(text), history=tuple(history), knowledge=store)


def turn(i: int, text: str, role: Role = Role.USER) -> ChatTurn:
    return ChatTurn(role=role, text=text, index=i)


class TestGenericAgent:
    def test_demonstrative_without_antecedent_is_contextual(self, store):
        report = GenericAmbiguityAgent().detect(
            ctx_for("Can you show me the schema of this dataset", store)
        )
        assert report.ambiguity_detected
        assert report.ambiguity_type is AmbiguityType.CONTEXTUAL
        assert "this" in report.detail

    def test_bare_identifier_is_syntactic(self, store):
        report = GenericAmbiguityAgent().detect(ctx_for("XYZ123", store))
        assert report.ambiguity_detected
        assert report.ambiguity_type is AmbiguityType.SYNTACTIC

    def test_unbounded_time_span_is_aleatoric(self, store):
        report = GenericAmbiguityAgent().detect(ctx_for("Show me segments over time", store))
        assert report.ambiguity_detected
        assert report.ambiguity_type is AmbiguityType.ALEATORIC
        assert "over time" in report.detail

    def test_plain_query_is_not_flagged(self, store):
        report = GenericAmbiguityAgent().detect(ctx_for("What is my largest audience", store))
        assert not report.ambiguity_detected

    def test_antecedent_in_history_suppresses_contextual(self, store):
        history = [turn(0, "I created a dataset called orders_v2 yesterday")]
        report = GenericAmbiguityAgent().detect(
            ctx_for("Can you show me the schema of this dataset", store, history)
        )
        assert not report.ambiguity_detected

    def test_antecedent_window_is_four_turns(self, store):
        # The referent is five turns back, outside the window.
        history = [turn(0, "the orders_v2 dataset is ready")] + [
            turn(i, "ok", Role.ASSISTANT if i % 2 else Role.USER) for i in range(1, 5)
        ]
        report = GenericAmbiguityAgent().detect(
            ctx_for("Can you show me the schema of this dataset", store, history)
        )
        assert report.ambiguity_detected
        assert report.ambiguity_type is AmbiguityType.CONTEXTUAL

    def test_lexicon_is_configurable(self, store):
        agent = GenericAmbiguityAgent(aleatoric_lexicon=("in the past",))
        assert not agent.detect(ctx_for("Show me segments over time", store)).ambiguity_detected
        assert agent.detect(ctx_for("usage in the past", store)).ambiguity_detected

    def test_substring_does_not_trigger_pronoun(self, store):
        # "it" inside "ingested" must not count as a reference
        report = GenericAmbiguityAgent().detect(
            ctx_for("Confirm if data is currently being ingested", store)
        )
        assert not report.ambiguity_detected


def product_store(catalog: dict[str, set[str]]) -> Store:
    products = [
        ProductEntry(product_id=f"p{i}", display_name=name, keywords=frozenset(kw))
        for i, (name, kw) in enumerate(catalog.items())
    ]
    return Store([], products, ConceptGraph({}))


class TestProductAgent:
    def test_three_product_collision(self, store):
        report = ProductAmbiguityAgent().detect(
            ctx_for("how do I manage tasks for assets and storefront", store)
        )
        assert report.ambiguity_detected
        assert [m.label for m in report.matches] == [
            "Adobe Workfront",
            "Adobe Experience Manager",
            "Adobe Commerce",
        ]

    def test_single_product_match_is_unambiguous(self, store):
        report = ProductAmbiguityAgent().detect(ctx_for("open my workfront tasks list", store))
        assert not report.ambiguity_detected
        assert report.matches == ()

    def test_empty_catalog(self):
        report = ProductAmbiguityAgent().detect(
            ctx_for("anything at all", product_store({}))
        )
        assert not report.ambiguity_detected

    @given(
        catalog=st.dictionaries(
            keys=st.sampled_from(["P1", "P2", "P3", "P4"]),
            values=st.sets(st.sampled_from(["alpha", "beta", "gamma", "delta"]), min_size=1),
            min_size=1,
            max_size=4,
        ),
        words=st.lists(
            st.sampled_from(["alpha", "beta", "gamma", "delta", "other", "words"]),
            min_size=1,
            max_size=6,
        ),
    )
    def test_match_set_equals_brute_force(self, catalog, words):
        query = " ".join(words)
        store = product_store(catalog)
        report = ProductAmbiguityAgent().detect(ctx_for(query, store))
        tokens = {t.lower for t in tokenize(query)}
        expected = {name for name, kw in catalog.items() if kw & tokens}
        if len(expected) >= 2:
            assert report.ambiguity_detected
            assert {m.label for m in report.matches} == expected
        else:
            assert not report.ambiguity_detected

    def test_best_guess_has_largest_overlap(self, store):
        report = ProductAmbiguityAgent().detect(
            ctx_for("projects status in workfront and storefront checkout", store)
        )
        # workfront matches 2 keywords, commerce 2; tie broken by catalog order
        assert report.matches[0].label == "Adobe Workfront"


def entity_store(*specs: tuple[str, str, str]) -> Store:
    entities = [Entity(ref_id=r, name=n, kind=k) for r, n, k in specs]
    return Store(entities, [], ConceptGraph({}))


class TestEntityAgent:
    def test_two_way_collision(self, store):
        report = EntityLinkingAgent().detect(ctx_for("what is TEST", store))
        assert report.ambiguity_detected
        assert {m.label for m in report.matches} == {"TEST (segment)", "TEST (dataset)"}
        assert report.detail == "TEST can be linked to TEST (dataset), TEST (segment)"

    def test_three_way_detail_shape(self):
        store = entity_store(("r1", "ENT", "a"), ("r2", "ENT", "b"), ("r3", "ENT", "c"))
        report = EntityLinkingAgent().detect(ctx_for("tell me about ENT", store))
        assert report.detail == "ENT can be linked to ENT (a), ENT (b), ENT (c)"

    def test_unique_name_is_unambiguous(self, store):
        report = EntityLinkingAgent().detect(ctx_for("list of fields in abc123", store))
        assert not report.ambiguity_detected

    def test_all_matches_share_span_and_span_text_equals_name(self, store):
        report = EntityLinkingAgent().detect(ctx_for("what is TEST", store))
        spans = {m.surface_span for m in report.matches}
        assert len(spans) == 1
        mention = span_text("what is TEST", next(iter(spans)))
        for match in report.matches:
            entity = store.resolve_ref(match.ref_id)
            assert mention.casefold() == entity.name.casefold()

    def test_kind_qualifier_narrows_the_link(self, store):
        report = EntityLinkingAgent().detect(ctx_for("what is TEST (dataset)", store))
        assert not report.ambiguity_detected

    def test_unrecognized_qualifier_keeps_ambiguity(self, store):
        report = EntityLinkingAgent().detect(ctx_for("what is TEST (the new one)", store))
        assert report.ambiguity_detected

    def test_leftmost_ambiguous_span_wins(self):
        store = entity_store(
            ("r1", "AAA", "dataset"), ("r2", "AAA", "segment"),
            ("r3", "ZZZ", "dataset"), ("r4", "ZZZ", "segment"),
        )
        report = EntityLinkingAgent().detect(ctx_for("compare ZZZ with AAA", store))
        assert report.detail.startswith("ZZZ can be linked to")

    def test_fuzzy_match_behind_flag(self):
        store = entity_store(("r1", "orders", "dataset"), ("r2", "orders", "segment"))
        exact = EntityLinkingAgent().detect(ctx_for("show ordrs", store))
        assert not exact.ambiguity_detected
        fuzzy = EntityLinkingAgent(fuzzy=True).detect(ctx_for("show ordrs", store))
        assert fuzzy.ambiguity_detected
        assert {m.ref_id for m in fuzzy.matches} == {"r1", "r2"}

    def test_monotonic_under_store_growth(self, store):
        # Adding an entity that joins the reported collision only grows it.
        query = "what is TEST"
        before = EntityLinkingAgent().detect(ctx_for(query, store))
        grown = Store(
            list(store.entities) + [Entity(ref_id="ent-new", name="TEST", kind="audience")],
            list(store.products),
            store.concepts,
        )
        after = EntityLinkingAgent().detect(ctx_for(query, grown))
        before_keys = {(m.ref_id, m.kind) for m in before.matches}
        after_keys = {(m.ref_id, m.kind) for m in after.matches}
        assert before_keys <= after_keys

    @given(name=st.sampled_from(["fresh", "unseen", "brand"]))
    def test_monotonic_under_unrelated_additions(self, name):
        base = entity_store(("r1", "TEST", "dataset"), ("r2", "TEST", "segment"))
        query = "what is TEST"
        before = EntityLinkingAgent().detect(ctx_for(query, base))
        grown = Store(
            list(base.entities) + [Entity(ref_id="rx", name=name, kind="dataset")],
            [],
            ConceptGraph({}),
        )
        after = EntityLinkingAgent().detect(ctx_for(query, grown))
        assert {(m.ref_id, m.kind) for m in before.matches} <= {
            (m.ref_id, m.kind) for m in after.matches
        }


def _concept_oracle(text: str, terms: list[str]) -> list[str]:
    """Independent longest-match scan: enumerate every substring occurrence."""
    hits = []
    lowered = text.lower()
    for term in terms:
        t = term.lower()
        start = 0
        while True:
            found = lowered.find(t, start)
            if found == -1:
                break
            end = found + len(t)
            before_ok = found == 0 or not (lowered[found - 1].isalnum() or lowered[found - 1] == "_")
            after_ok = end == len(lowered) or not (lowered[end].isalnum() or lowered[end] == "_")
            if before_ok and after_ok:
                hits.append((found, end, t))
            start = found + 1
    chosen: list[tuple[int, int, str]] = []
    for hit in sorted(hits, key=lambda h: (-(h[1] - h[0]), h[0])):
        if all(hit[1] <= c[0] or hit[0] >= c[1] for c in chosen):
            chosen.append(hit)
    ordered_terms: list[str] = []
    for _, _, term in sorted(chosen):
        if term not in ordered_terms:
            ordered_terms.append(term)
    return ordered_terms


class TestConceptAgent:
    def test_two_terms_found(self, store):
        report = ConceptGraphAgent().detect(
            ctx_for("is the sandbox segment ready", store)
        )
        assert not report.ambiguity_detected
        assert [g.term for g in report.grounding] == ["sandbox", "segment"]

    def test_no_terms(self, store):
        report = ConceptGraphAgent().detect(ctx_for("hello there", store))
        assert report.grounding == ()

    def test_longest_match_wins_on_overlap(self, store):
        report = ConceptGraphAgent().detect(
            ctx_for("describe the audience activation flow", store)
        )
        assert [g.term for g in report.grounding] == ["audience activation"]

    @settings(max_examples=60)
    @given(
        words=st.lists(
            st.sampled_from(
                ["sandbox", "segment", "dataset", "audience", "activation",
                 "schema", "profile", "the", "my", "flow", "show"]
            ),
            min_size=1,
            max_size=8,
        )
    )
    def test_matches_brute_force_oracle(self, words):
        store = load_fixture_store()
        text = " ".join(words)
        report = ConceptGraphAgent().detect(ctx_for(text, store))
        assert [g.term for g in report.grounding] == _concept_oracle(
            text, store.concepts.terms()
        )

    @given(text=st.text(max_size=60).filter(lambda s: s.strip()))
    def test_never_detects(self, text):
        store = load_fixture_store()
        report = ConceptGraphAgent().detect(ctx_for(text.strip(), store))
        assert report.ambiguity_detected is False


_fixture_store_cache = None


def load_fixture_store() -> Store:
    global _fixture_store_cache
    if _fixture_store_cache is None:
        from disambig.store import load_store
        from conftest import FIXTURES

        _fixture_store_cache = load_store(FIXTURES / "store.json")
    return _fixture_store_cache


class TestDeterminism:
    @pytest.mark.parametrize(
        "text",
        ["what is TEST", "XYZ123", "Show me segments over time",
         "how do I manage tasks for assets and storefront",
         "describe the audience activation flow"],
    )
    def test_every_builtin_agent_is_deterministic(self, store, text):
        for registered in default_registry():
            ctx = ctx_for(text, store)
            first = registered.agent.detect(ctx)
            second = registered.agent.detect(ctx)
            assert first == second


class TestRegistry:
    def test_duplicate_id_rejected(self):
        registry = AgentRegistry()
        descriptor = AgentDescriptor(agent_id="x", description="d")
        registry.register(descriptor, GenericAmbiguityAgent())
        with pytest.raises(InvariantViolation):
            registry.register(descriptor, GenericAmbiguityAgent())

    def test_disabled_agents_are_skipped(self):
        registry = default_registry(enabled={"product": False})
        ids = [r.descriptor.agent_id for r in registry.enabled()]
        assert ids == ["generic", "entity_linking", "concept_graph"]

    def test_descriptor_validation(self):
        with pytest.raises(InvariantViolation):
            AgentDescriptor(agent_id="x", description="d", timeout_ms=0)
        with pytest.raises(InvariantViolation):
            AgentDescriptor(agent_id="", description="d")

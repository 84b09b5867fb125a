"""The four built-in agents: generic, product, entity linking, concept graph.

The generic detector is rule-based so the whole pipeline runs deterministically
offline; an LLM-backed variant can be dropped in behind the same interface.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from ..model import AgentReport, AmbiguityType, MatchCandidate
from ..store import Entity
from ..textutil import (
    byte_span,
    find_term_hits,
    longest_nonoverlapping,
    normalized_edit_distance,
    tokenize,
)
from .base import Agent, AgentContext, AgentDescriptor, AgentRegistry

GENERIC_AGENT_ID = "generic"
PRODUCT_AGENT_ID = "product"
ENTITY_AGENT_ID = "entity_linking"
CONCEPT_AGENT_ID = "concept_graph"

GENERIC_DESCRIPTION = (
    "Detects domain-agnostic sentence-level ambiguity: unresolved references, "
    "bare identifiers without a recognizable intent, and underspecified time "
    "or scope phrases."
)
PRODUCT_DESCRIPTION = (
    "Decides whether the query could be answered in the context of more than "
    "one product from the catalog."
)
ENTITY_DESCRIPTION = (
    "Associates mentions in the query with the corresponding entries in the "
    "knowledge store and flags mentions that link to multiple entities."
)
CONCEPT_DESCRIPTION = (
    "Looks up domain terminology found in the query and supplies definitions "
    "to ground the conversation; never reports an ambiguity itself."
)

DEMONSTRATIVES = frozenset({"this", "that", "it", "these", "those"})

# Verbs/question words that mark a query as having a recognizable intent.
INTENT_WORDS = frozenset(
    {
        "show", "list", "what", "which", "who", "when", "where", "why", "how",
        "can", "could", "would", "should", "please", "confirm", "check", "get",
        "find", "give", "tell", "create", "make", "add", "delete", "remove",
        "display", "describe", "count", "compare", "is", "are", "do", "does",
        "help", "explain", "summarize", "update", "run", "export",
    }
)

DEFAULT_ALEATORIC_LEXICON = ("over time", "recently", "latest")

ANTECEDENT_WINDOW = 4  # history turns searched for a referent

_QUOTED_RE = re.compile(r'"[^"]+"')
_KIND_QUALIFIER_RE = re.compile(r"\s*\(\s*([^()]*?)\s*\)")


def _has_antecedent(head: str | None, recent_texts: Sequence[str]) -> bool:
    """Whether the recent turns plausibly introduce a referent.

    A referent is the head noun itself, an identifier-like token (contains a
    digit), a capitalized token past the start of a turn, or a quoted span.
    """
    for text in recent_texts:
        tokens = tokenize(text)
        for pos, token in enumerate(tokens):
            if head and token.lower == head:
                return True
            if any(c.isdigit() for c in token.text):
                return True
            if pos > 0 and token.text[0].isupper():
                return True
        if _QUOTED_RE.search(text):
            return True
    return False


@dataclass(frozen=True)
class GenericAmbiguityAgent:
    """Domain-agnostic rules for contextual, syntactic, and aleatoric ambiguity."""

    aleatoric_lexicon: tuple[str, ...] = DEFAULT_ALEATORIC_LEXICON

    def detect(self, ctx: AgentContext) -> AgentReport:
        text = ctx.query.text
        tokens = tokenize(text)
        recent = [t.text for t in ctx.history[-ANTECEDENT_WINDOW:]]

        # Contextual: a demonstrative/pronoun with nothing to refer back to.
        for pos, token in enumerate(tokens):
            if token.lower not in DEMONSTRATIVES:
                continue
            head = tokens[pos + 1].lower if pos + 1 < len(tokens) else None
            if not _has_antecedent(head, recent):
                return self._report(
                    AmbiguityType.CONTEXTUAL,
                    f'the reference "{token.text}" has no clear antecedent '
                    f"in the recent conversation",
                )

        # Syntactic: a bare token or identifier with no recognizable intent.
        if 0 < len(tokens) <= 2 and not any(t.lower in INTENT_WORDS for t in tokens):
            return self._report(
                AmbiguityType.SYNTACTIC,
                f'the query "{text}" is a bare token and the intent behind it is unclear',
            )

        # Aleatoric: an underspecified temporal/scope phrase.
        lowered = text.lower()
        for phrase in self.aleatoric_lexicon:
            if re.search(rf"(?<!\w){re.escape(phrase.lower())}(?!\w)", lowered):
                return self._report(
                    AmbiguityType.ALEATORIC,
                    f'the phrase "{phrase}" does not pin down a concrete range',
                )

        return AgentReport(
            agent_id=GENERIC_AGENT_ID,
            agent_description=GENERIC_DESCRIPTION,
            ambiguity_detected=False,
        )

    def _report(self, kind: AmbiguityType, detail: str) -> AgentReport:
        return AgentReport(
            agent_id=GENERIC_AGENT_ID,
            agent_description=GENERIC_DESCRIPTION,
            ambiguity_detected=True,
            ambiguity_type=kind,
            detail=detail,
        )


@dataclass(frozen=True)
class ProductAmbiguityAgent:
    """Flags queries whose tokens overlap the keyword sets of >= 2 products."""

    def detect(self, ctx: AgentContext) -> AgentReport:
        store = ctx.knowledge
        text = ctx.query.text
        tokens = tokenize(text)
        token_set = {t.lower for t in tokens}

        matched: list[tuple[int, int, MatchCandidate]] = []  # (-overlap, idx, match)
        if store is not None:
            for idx, product in enumerate(store.products):
                overlap = product.keywords & token_set
                if not overlap:
                    continue
                first = next(t for t in tokens if t.lower in product.keywords)
                matched.append(
                    (
                        -len(overlap),
                        idx,
                        MatchCandidate(
                            surface_span=(first.byte_start, first.byte_end),
                            label=product.display_name,
                            kind="product",
                            ref_id=product.product_id,
                        ),
                    )
                )

        if len(matched) < 2:
            return AgentReport(
                agent_id=PRODUCT_AGENT_ID,
                agent_description=PRODUCT_DESCRIPTION,
                ambiguity_detected=False,
            )

        # Strongest keyword overlap first, catalog order on ties, so the
        # leading match doubles as the best-guess product.
        matched.sort(key=lambda entry: entry[:2])
        matches = tuple(entry[2] for entry in matched)
        names = ", ".join(m.label for m in matches)
        return AgentReport(
            agent_id=PRODUCT_AGENT_ID,
            agent_description=PRODUCT_DESCRIPTION,
            ambiguity_detected=True,
            detail=f"the query matches keywords of {len(matches)} products: {names}",
            matches=matches,
        )


@dataclass(frozen=True)
class EntityLinkingAgent:
    """Finds query spans that link to multiple entities of the store.

    Exact name matching by default; optional fuzzy matching (normalized edit
    distance <= ``fuzzy_threshold``) is off because exactness keeps precision
    high. A span followed by a parenthesized kind, e.g. ``TEST (dataset)``,
    counts as already disambiguated and is narrowed to that kind.
    """

    fuzzy: bool = False
    fuzzy_threshold: float = 0.2

    def detect(self, ctx: AgentContext) -> AgentReport:
        store = ctx.knowledge
        text = ctx.query.text
        if store is None:
            return self._not_detected()

        # span (char offsets) -> candidate entities
        candidates: dict[tuple[int, int], list[Entity]] = {}
        for hit in find_term_hits(text, store.entity_names()):
            candidates.setdefault((hit.start, hit.end), []).extend(store.lookup_name(hit.matched))

        if self.fuzzy:
            for token in tokenize(text):
                span = (token.start, token.end)
                for name in store.entity_names():
                    distance = normalized_edit_distance(token.lower, name)
                    if 0 < distance <= self.fuzzy_threshold:
                        candidates.setdefault(span, []).extend(store.lookup_name(name))

        ambiguous: list[tuple[tuple[int, int], list[Entity]]] = []
        for span, group in candidates.items():
            unique = {e.ref_id: e for e in group}
            group = sorted(unique.values(), key=lambda e: (e.kind, e.ref_id))
            group = self._narrow_by_kind_qualifier(text, span, group)
            if len(group) >= 2:
                ambiguous.append((span, group))

        if not ambiguous:
            return self._not_detected()

        # Leftmost span wins; longest on ties.
        ambiguous.sort(key=lambda item: (item[0][0], -(item[0][1] - item[0][0])))
        (start, end), group = ambiguous[0]
        span_bytes = byte_span(text, start, end)
        labels = [f"{e.name} ({e.kind})" for e in group]
        matches = tuple(
            MatchCandidate(surface_span=span_bytes, label=label, kind=e.kind, ref_id=e.ref_id)
            for label, e in zip(labels, group)
        )
        return AgentReport(
            agent_id=ENTITY_AGENT_ID,
            agent_description=ENTITY_DESCRIPTION,
            ambiguity_detected=True,
            detail=f"{text[start:end]} can be linked to {', '.join(labels)}",
            matches=matches,
        )

    def _narrow_by_kind_qualifier(
        self, text: str, span: tuple[int, int], group: list[Entity]
    ) -> list[Entity]:
        m = _KIND_QUALIFIER_RE.match(text, span[1])
        if not m:
            return group
        qualifier = m.group(1).casefold()
        narrowed = [e for e in group if e.kind.casefold() == qualifier]
        return narrowed or group

    def _not_detected(self) -> AgentReport:
        return AgentReport(
            agent_id=ENTITY_AGENT_ID,
            agent_description=ENTITY_DESCRIPTION,
            ambiguity_detected=False,
        )


@dataclass(frozen=True)
class ConceptGraphAgent:
    """Grounding-only agent: never detects, returns definitions of query terms."""

    def detect(self, ctx: AgentContext) -> AgentReport:
        store = ctx.knowledge
        grounding = ()
        if store is not None and len(store.concepts) > 0:
            hits = find_term_hits(ctx.query.text, store.concepts.terms())
            seen: dict[str, None] = {}
            for hit in longest_nonoverlapping(hits):
                seen.setdefault(hit.term)
            grounding = tuple(
                definition
                for term in seen
                if (definition := store.concepts.get(term)) is not None
            )
        return AgentReport(
            agent_id=CONCEPT_AGENT_ID,
            agent_description=CONCEPT_DESCRIPTION,
            ambiguity_detected=False,
            grounding=grounding,
        )


def default_registry(
    aleatoric_lexicon: Sequence[str] = DEFAULT_ALEATORIC_LEXICON,
    entity_fuzzy: bool = False,
    timeout_ms: int = 2000,
    enabled: dict[str, bool] | None = None,
) -> AgentRegistry:
    """All four built-ins in their canonical prompt order."""
    enabled = enabled or {}
    registry = AgentRegistry()
    for agent_id, description, agent in (
        (GENERIC_AGENT_ID, GENERIC_DESCRIPTION, GenericAmbiguityAgent(tuple(aleatoric_lexicon))),
        (PRODUCT_AGENT_ID, PRODUCT_DESCRIPTION, ProductAmbiguityAgent()),
        (ENTITY_AGENT_ID, ENTITY_DESCRIPTION, EntityLinkingAgent(fuzzy=entity_fuzzy)),
        (CONCEPT_AGENT_ID, CONCEPT_DESCRIPTION, ConceptGraphAgent()),
    ):
        registry.register(
            AgentDescriptor(
                agent_id=agent_id,
                description=description,
                enabled=enabled.get(agent_id, True),
                timeout_ms=timeout_ms,
            ),
            agent,
        )
    return registry

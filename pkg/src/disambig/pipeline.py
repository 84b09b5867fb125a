"""Disambiguation pipelines: concurrent agent fan-out, prompt assembly,
the unified single-call decision, and the sequential few-shot baseline.

The unified pipeline spends exactly one completion call per query; the
baseline spends two (rewrite + classify) or three (plus question generation).
Any backend or parse failure degrades to "not ambiguous" with a warning --
the system must never invent a clarification question.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .agents.base import AgentContext, AgentRegistry
from .agents.builtin import PRODUCT_AGENT_ID
from .backend import CompletionBackend, CompletionRequest
from .errors import BackendError, InvariantViolation, UnparsableDecision
from .model import (
    AgentReport,
    ChatTurn,
    ClarificationOption,
    DisambiguationResult,
    LlmDecision,
    OptionPayload,
    Query,
    SurfaceMode,
)
from .store import Store
from .textutil import span_text

logger = logging.getLogger(__name__)
trace_logger = logging.getLogger("disambig.trace")

# Versioned instruction text; golden-tested verbatim. Bump the version
# comment when the wording changes so prompt goldens are updated on purpose.
# v1
INSTRUCTION_TEMPLATE = """\
Instructions:
Review the conversation, the domain grounding, and the agent findings above.
First make a binary decision: does the query contain an ambiguity that must be
resolved before it can be answered? If yes, write one clarification question
that targets the detected ambiguity and list the ids of the agents whose
findings it rests on. Ask only when a clarification is genuinely necessary.
Return a single JSON object and nothing else:
{"ambiguous": true|false, "clarification_question": "..." or null, "referenced_agents": ["..."]}"""

BASELINE_REWRITE_TEMPLATE = """\
Rewrite the user query as one standalone query, resolving references against
the conversation. Return only the rewritten query.

{context}

Rewritten query:"""

BASELINE_CLASSIFY_TEMPLATE = """\
Decide whether the query below still needs clarification before it can be
answered. Return a single JSON object: {{"ambiguous": true|false}}

Binary ambiguity check for: {original}
Rewritten query: {rewritten}"""

BASELINE_CLARIFY_TEMPLATE = """\
Write one clarification question for: {original}
Rewritten query: {rewritten}

{examples}

Clarification question:"""

# Ten hand-written few-shot examples for the baseline's question stage.
DEFAULT_FEWSHOT_EXAMPLES: tuple[str, ...] = (
    'Query: "sales numbers" -> Clarification: Which product or report do the sales numbers refer to?',
    'Query: "show me the report" -> Clarification: Which report would you like to see?',
    'Query: "delete it" -> Clarification: What exactly should be deleted?',
    'Query: "growth over time" -> Clarification: Which time range should I use?',
    'Query: "status of the job" -> Clarification: Which job are you asking about?',
    'Query: "orders2024" -> Clarification: What would you like to know about "orders2024"?',
    'Query: "compare the two campaigns" -> Clarification: Which two campaigns should I compare?',
    'Query: "is the sync done" -> Clarification: Which sync are you referring to?',
    'Query: "largest audience" -> Clarification: None needed.',
    'Query: "list all datasets created today" -> Clarification: None needed.',
)


@dataclass(frozen=True)
class PipelinePolicy:
    """Knobs of one pipeline run; the surface value mirrors the config enum."""

    surface: SurfaceMode = SurfaceMode.ASK_FIRST
    history_window: int = 8
    parallel_agents: bool = True
    max_tokens: int = 512
    temperature: float = 0.0
    debug_trace: bool = False


@dataclass(frozen=True)
class PromptBundle:
    """Deterministic, ordered prompt assembly; render() is byte-stable."""

    context_section: str
    grounding_section: str = ""
    agent_sections: tuple[tuple[str, str], ...] = ()
    instruction_section: str = INSTRUCTION_TEMPLATE
    fewshot_examples: tuple[str, ...] = ()

    def render(self) -> str:
        parts = [self.context_section]
        if self.grounding_section:
            parts.append(self.grounding_section)
        if self.agent_sections:
            body = "\n\n".join(text for _, text in self.agent_sections)
            parts.append(f"Agent findings:\n\n{body}")
        if self.fewshot_examples:
            parts.append("Examples:\n" + "\n".join(self.fewshot_examples))
        parts.append(self.instruction_section)
        return "\n\n".join(parts)


@dataclass(frozen=True)
class PipelineOutcome:
    """Result plus observability: the prompt, stage timings, warnings."""

    result: DisambiguationResult
    prompt: PromptBundle
    elapsed_ms: dict[str, float] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()


def run_agents(
    ctx: AgentContext, registry: AgentRegistry, parallel: bool = True
) -> list[AgentReport]:
    """Invoke every enabled agent; output order is registration order.

    In parallel mode each agent is bounded by its descriptor's timeout_ms;
    a timed-out or failing agent contributes no report and is logged as a
    warning. The sequential mode exists as the equivalence oracle and applies
    no timeout (a synchronous call cannot be preempted).
    """
    enabled = registry.enabled()
    if not enabled:
        return []

    reports: list[AgentReport] = []
    if not parallel:
        for registered in enabled:
            try:
                report = registered.agent.detect(ctx)
            except Exception as exc:
                logger.warning("agent %s failed: %s", registered.descriptor.agent_id, exc)
                continue
            reports.append(_stamp_id(report, registered.descriptor.agent_id))
        return reports

    pool = ThreadPoolExecutor(max_workers=len(enabled), thread_name_prefix="agent")
    started = time.monotonic()
    futures = [(r, pool.submit(r.agent.detect, ctx)) for r in enabled]
    try:
        for registered, future in futures:
            agent_id = registered.descriptor.agent_id
            budget_s = registered.descriptor.timeout_ms / 1000.0 - (time.monotonic() - started)
            try:
                report = future.result(timeout=max(0.0, budget_s))
            except FutureTimeout:
                logger.warning(
                    "agent %s timed out after %d ms",
                    agent_id,
                    registered.descriptor.timeout_ms,
                )
                future.cancel()
                continue
            except Exception as exc:
                logger.warning("agent %s failed: %s", agent_id, exc)
                continue
            reports.append(_stamp_id(report, agent_id))
    finally:
        pool.shutdown(wait=False, cancel_futures=True)
    return reports


def _stamp_id(report: AgentReport, agent_id: str) -> AgentReport:
    if report.agent_id != agent_id:
        report = dataclasses.replace(report, agent_id=agent_id)
    return report


def _context_section(query: Query, history: Sequence[ChatTurn], window: int) -> str:
    lines = []
    recent = list(history)[-window:] if window > 0 else []
    if recent:
        lines.append("Conversation so far:")
        lines.extend(f"{turn.role.value}: {turn.text}" for turn in recent)
    lines.append(f"User query: {query.text}")
    return "\n".join(lines)


def _matches_line(query: Query, report: AgentReport) -> str:
    spans = {m.surface_span for m in report.matches}
    labels = ", ".join(m.label for m in report.matches)
    if len(spans) == 1:
        mention = span_text(query.text, next(iter(spans)))
        return f"{mention} can be linked to {labels}"
    return labels


def build_prompt(
    query: Query,
    history: Sequence[ChatTurn],
    reports: Sequence[AgentReport],
    history_window: int = 8,
) -> PromptBundle:
    """Assemble the unified prompt: every detecting or grounding report shows up."""
    grounding_lines = []
    seen_terms: set[str] = set()
    for report in reports:
        for definition in report.grounding:
            if definition.term in seen_terms:
                continue
            seen_terms.add(definition.term)
            line = f"- {definition.term}: {definition.definition}"
            if definition.keywords:
                line += f" (keywords: {', '.join(definition.keywords)})"
            grounding_lines.append(line)
    grounding_section = "Domain grounding:\n" + "\n".join(grounding_lines) if grounding_lines else ""

    agent_sections = []
    for report in reports:
        if not report.ambiguity_detected and not report.grounding:
            continue
        lines = [
            f"Agent description: {report.agent_description}",
            f"Ambiguity Detected: {report.ambiguity_detected}",
        ]
        if report.ambiguity_detected and report.detail:
            lines.append(f"Detail: {report.detail}")
        if report.matches:
            lines.append(f"Matches: {_matches_line(query, report)}")
        agent_sections.append((report.agent_id, "\n".join(lines)))

    return PromptBundle(
        context_section=_context_section(query, history, history_window),
        grounding_section=grounding_section,
        agent_sections=tuple(agent_sections),
    )


_TRUEISH_RE = re.compile(r"\b(true|yes)\b", re.IGNORECASE)
_FALSEISH_RE = re.compile(r"\b(false|no)\b", re.IGNORECASE)


def _extract_json_object(raw: str) -> Optional[dict]:
    decoder = json.JSONDecoder()
    for match in re.finditer(r"\{", raw):
        try:
            obj, _ = decoder.raw_decode(raw, match.start())
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


def parse_decision(raw: str, known_agent_ids: Optional[Sequence[str]] = None) -> LlmDecision:
    """Parse the first JSON object in model output into an LlmDecision.

    Unknown referenced agents are dropped with a warning; anything that
    breaks the decision contract (missing fields, wrong types, question
    present without ambiguity or vice versa) raises UnparsableDecision.
    """
    obj = _extract_json_object(raw)
    if obj is None:
        raise UnparsableDecision(raw)

    ambiguous = obj.get("ambiguous")
    question = obj.get("clarification_question")
    referenced = obj.get("referenced_agents", [])
    if not isinstance(ambiguous, bool):
        raise UnparsableDecision(raw)
    if question is not None and not isinstance(question, str):
        raise UnparsableDecision(raw)
    if not isinstance(referenced, list) or not all(isinstance(a, str) for a in referenced):
        raise UnparsableDecision(raw)

    if known_agent_ids is not None:
        known = set(known_agent_ids)
        dropped = [a for a in referenced if a not in known]
        if dropped:
            logger.warning("decision referenced unknown agents, dropping: %s", dropped)
            referenced = [a for a in referenced if a in known]

    try:
        return LlmDecision(
            ambiguous=ambiguous,
            clarification_question=question,
            referenced_agent_ids=tuple(referenced),
        )
    except InvariantViolation as exc:
        raise UnparsableDecision(raw) from exc


def _derive_options(
    decision: LlmDecision, reports: Sequence[AgentReport]
) -> tuple[ClarificationOption, ...]:
    """Options come from the matches of the agents the decision referenced,
    falling back to every detecting agent's matches."""
    referenced = [
        r for r in reports if r.ambiguity_detected and r.agent_id in decision.referenced_agent_ids
    ]
    if not referenced:
        referenced = [r for r in reports if r.ambiguity_detected]
    options: list[ClarificationOption] = []
    seen: set[tuple[str, str]] = set()
    for report in referenced:
        for match in report.matches:
            key = (match.ref_id, match.kind)
            if key in seen:
                continue
            seen.add(key)
            options.append(
                ClarificationOption(
                    option_id=f"opt-{len(options) + 1}",
                    label=match.label,
                    payload=OptionPayload(ref_id=match.ref_id, kind=match.kind),
                )
            )
    return tuple(options)


def _choose_surface(
    policy: PipelinePolicy, decision: LlmDecision, reports: Sequence[AgentReport]
) -> SurfaceMode:
    """AnswerFirst only under the answer-first policy, and only for a pure
    product ambiguity where a best-guess product exists."""
    if not decision.ambiguous or policy.surface is not SurfaceMode.ANSWER_FIRST:
        return SurfaceMode.ASK_FIRST
    detecting = {r.agent_id for r in reports if r.ambiguity_detected}
    product = next((r for r in reports if r.agent_id == PRODUCT_AGENT_ID), None)
    if detecting == {PRODUCT_AGENT_ID} and product is not None and product.matches:
        return SurfaceMode.ANSWER_FIRST
    return SurfaceMode.ASK_FIRST


def _emit_trace(policy: PipelinePolicy, pipeline: str, elapsed: dict, warnings: Sequence[str]) -> None:
    if not policy.debug_trace:
        return
    for stage, ms in elapsed.items():
        trace_logger.info(json.dumps({"pipeline": pipeline, "stage": stage, "elapsed_ms": ms}))
    for warning in warnings:
        trace_logger.info(json.dumps({"pipeline": pipeline, "warning": warning}))


def disambiguate_unified(
    query: Query,
    history: Sequence[ChatTurn],
    store: Store,
    registry: AgentRegistry,
    backend: CompletionBackend,
    policy: PipelinePolicy = PipelinePolicy(),
) -> PipelineOutcome:
    """Agent fan-out, one prompt, one completion call, one parsed decision."""
    warnings: list[str] = []
    elapsed: dict[str, float] = {}
    ctx = AgentContext(query=query, history=tuple(history), knowledge=store)

    t0 = time.perf_counter()
    reports = run_agents(ctx, registry, parallel=policy.parallel_agents)
    elapsed["agents"] = (time.perf_counter() - t0) * 1000.0
    produced = {r.agent_id for r in reports}
    for registered in registry.enabled():
        if registered.descriptor.agent_id not in produced:
            warnings.append(
                f"agent {registered.descriptor.agent_id} produced no report (timeout or failure)"
            )

    t0 = time.perf_counter()
    prompt = build_prompt(query, history, reports, history_window=policy.history_window)
    elapsed["prompt"] = (time.perf_counter() - t0) * 1000.0

    calls_before = backend.stats.total_calls
    t0 = time.perf_counter()
    try:
        raw = backend.complete(
            CompletionRequest(
                prompt=prompt.render(),
                max_tokens=policy.max_tokens,
                temperature=policy.temperature,
            )
        )
        decision = parse_decision(raw, known_agent_ids=[r.agent_id for r in reports])
    except BackendError as exc:
        warnings.append(f"backend failure: {exc}; falling back to not-ambiguous")
        decision = LlmDecision(ambiguous=False)
    except UnparsableDecision:
        warnings.append("model output carried no valid decision; falling back to not-ambiguous")
        decision = LlmDecision(ambiguous=False)
    elapsed["llm"] = (time.perf_counter() - t0) * 1000.0
    calls_used = backend.stats.total_calls - calls_before

    options = _derive_options(decision, reports) if decision.ambiguous else ()
    result = DisambiguationResult(
        decision=decision,
        options=options,
        surface_mode=_choose_surface(policy, decision, reports),
        llm_calls_used=calls_used,
        agent_reports=tuple(reports),
    )
    _emit_trace(policy, "unified", elapsed, warnings)
    return PipelineOutcome(result=result, prompt=prompt, elapsed_ms=elapsed, warnings=tuple(warnings))


def _parse_binary(raw: str) -> Optional[bool]:
    obj = _extract_json_object(raw)
    if obj is not None and isinstance(obj.get("ambiguous"), bool):
        return obj["ambiguous"]
    if _TRUEISH_RE.search(raw) and not _FALSEISH_RE.search(raw):
        return True
    if _FALSEISH_RE.search(raw) and not _TRUEISH_RE.search(raw):
        return False
    return None


def disambiguate_baseline(
    query: Query,
    history: Sequence[ChatTurn],
    backend: CompletionBackend,
    fewshot: Sequence[str] = DEFAULT_FEWSHOT_EXAMPLES,
    policy: PipelinePolicy = PipelinePolicy(),
) -> PipelineOutcome:
    """Sequential comparison pipeline: rewrite, classify, then (maybe) ask.

    Two completion calls for an unambiguous query, three for an ambiguous
    one. No agents are involved, so results never carry options.
    """
    if len(fewshot) != 10:
        raise InvariantViolation(f"baseline expects exactly 10 few-shot examples, got {len(fewshot)}")

    warnings: list[str] = []
    elapsed: dict[str, float] = {}
    calls_before = backend.stats.total_calls
    context = _context_section(query, history, policy.history_window)

    def call(prompt: str) -> str:
        return backend.complete(
            CompletionRequest(prompt=prompt, max_tokens=policy.max_tokens, temperature=policy.temperature)
        )

    ambiguous = False
    question: Optional[str] = None
    try:
        t0 = time.perf_counter()
        rewritten = call(BASELINE_REWRITE_TEMPLATE.format(context=context)).strip()
        elapsed["rewrite"] = (time.perf_counter() - t0) * 1000.0
        if not rewritten:
            warnings.append("rewrite stage returned nothing; using the original query")
            rewritten = query.text

        t0 = time.perf_counter()
        verdict_raw = call(
            BASELINE_CLASSIFY_TEMPLATE.format(original=query.text, rewritten=rewritten)
        )
        elapsed["classify"] = (time.perf_counter() - t0) * 1000.0
        verdict = _parse_binary(verdict_raw)
        if verdict is None:
            warnings.append("classifier output was unreadable; falling back to not-ambiguous")
            verdict = False

        if verdict:
            t0 = time.perf_counter()
            question = call(
                BASELINE_CLARIFY_TEMPLATE.format(
                    original=query.text,
                    rewritten=rewritten,
                    examples="Examples:\n" + "\n".join(fewshot),
                )
            ).strip()
            elapsed["clarify"] = (time.perf_counter() - t0) * 1000.0
            if question:
                ambiguous = True
            else:
                warnings.append("question stage returned nothing; falling back to not-ambiguous")
                question = None
    except BackendError as exc:
        warnings.append(f"backend failure: {exc}; falling back to not-ambiguous")
        ambiguous, question = False, None

    decision = LlmDecision(ambiguous=ambiguous, clarification_question=question)
    result = DisambiguationResult(
        decision=decision,
        options=(),
        surface_mode=SurfaceMode.ASK_FIRST,
        llm_calls_used=backend.stats.total_calls - calls_before,
        agent_reports=(),
    )
    prompt = PromptBundle(
        context_section=context,
        instruction_section=BASELINE_CLASSIFY_TEMPLATE.format(
            original=query.text, rewritten=query.text
        ),
        fewshot_examples=tuple(fewshot),
    )
    _emit_trace(policy, "baseline", elapsed, warnings)
    return PipelineOutcome(result=result, prompt=prompt, elapsed_ms=elapsed, warnings=tuple(warnings))

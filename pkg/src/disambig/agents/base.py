"""Agent interface and registry.

An agent inspects one query (plus conversation and knowledge) and returns an
AgentReport. Agents are stateless per call and must be safe to invoke
concurrently; the orchestrator fans out one call per enabled agent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Protocol, runtime_checkable

from ..errors import InvariantViolation
from ..model import AgentReport, ChatTurn, Query
from ..store import Store

DEFAULT_TIMEOUT_MS = 2000


@dataclass(frozen=True)
class AgentDescriptor:
    """Registry entry: identity, prompt description, and runtime limits.

    ``description`` is the exact text injected into prompts for this agent.
    """

    agent_id: str
    description: str
    enabled: bool = True
    timeout_ms: int = DEFAULT_TIMEOUT_MS

    def __post_init__(self) -> None:
        if not self.agent_id:
            raise InvariantViolation("agent_id must be non-empty")
        if not self.description.strip():
            raise InvariantViolation("agent description must be non-empty")
        if self.timeout_ms <= 0:
            raise InvariantViolation("timeout_ms must be positive")


@dataclass(frozen=True)
class AgentContext:
    """Read-only view an agent works from; agents must not mutate it."""

    query: Query
    history: tuple[ChatTurn, ...] = ()
    knowledge: Store | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "history", tuple(self.history))


@runtime_checkable
class Agent(Protocol):
    """The contract every agent implements."""

    def detect(self, ctx: AgentContext) -> AgentReport: ...


@dataclass(frozen=True)
class RegisteredAgent:
    descriptor: AgentDescriptor
    agent: Agent


@dataclass
class AgentRegistry:
    """Ordered agent collection; registration order is prompt order."""

    _agents: list[RegisteredAgent] = field(default_factory=list)

    def register(self, descriptor: AgentDescriptor, agent: Agent) -> None:
        if any(r.descriptor.agent_id == descriptor.agent_id for r in self._agents):
            raise InvariantViolation(f"agent_id already registered: {descriptor.agent_id!r}")
        self._agents.append(RegisteredAgent(descriptor, agent))

    def enabled(self) -> list[RegisteredAgent]:
        return [r for r in self._agents if r.descriptor.enabled]

    def __iter__(self) -> Iterator[RegisteredAgent]:
        return iter(self._agents)

    def __len__(self) -> int:
        return len(self._agents)

"""Pluggable ambiguity-detection agents and the built-in set."""

from .base import Agent, AgentContext, AgentDescriptor, AgentRegistry, RegisteredAgent
from .builtin import (
    ConceptGraphAgent,
    EntityLinkingAgent,
    GenericAmbiguityAgent,
    ProductAmbiguityAgent,
    default_registry,
)

__all__ = [
    "Agent",
    "AgentContext",
    "AgentDescriptor",
    "AgentRegistry",
    "RegisteredAgent",
    "ConceptGraphAgent",
    "EntityLinkingAgent",
    "GenericAmbiguityAgent",
    "ProductAmbiguityAgent",
    "default_registry",
]

"""Evaluation harness: gold construction, binary metrics, question alignment."""

from .dataset import Annotation, EvalExample, GoldLabel, load_dataset
from .metrics import ClassMetrics, MetricsReport, RougeScore, compute_prf, rouge_l, round_half_up
from .runner import EvalConfig, ExampleOutcome, evaluate
from .similarity import HashedProjectionEmbedder, OneHotHashEmbedder, similarity
from .vote import NeedsMoreAnnotations, majority_vote

__all__ = [
    "Annotation",
    "EvalExample",
    "GoldLabel",
    "load_dataset",
    "ClassMetrics",
    "MetricsReport",
    "RougeScore",
    "compute_prf",
    "rouge_l",
    "round_half_up",
    "EvalConfig",
    "ExampleOutcome",
    "evaluate",
    "HashedProjectionEmbedder",
    "OneHotHashEmbedder",
    "similarity",
    "NeedsMoreAnnotations",
    "majority_vote",
]

"""Embedding-based question similarity via greedy token matching.

Each candidate token is matched to its highest-cosine reference token and
vice versa; precision/recall are the mean max-similarities and the score is
their harmonic mean. The default embedder is a seeded hashed random
projection, so scores are deterministic across processes with no model
download; a real embedding service can be plugged in over HTTP.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, Sequence, runtime_checkable

import httpx
import numpy as np

from ..errors import EmbedderUnavailable
from ..textutil import tokenize


@runtime_checkable
class Embedder(Protocol):
    """Maps a token sequence to an (n_tokens, dim) array of vectors."""

    def vectors(self, tokens: Sequence[str]) -> np.ndarray: ...


def _token_digest(token: str, salt: str) -> int:
    return int.from_bytes(hashlib.sha256(f"{salt}\x00{token}".encode("utf-8")).digest()[:8], "big")


class HashedProjectionEmbedder:
    """Deterministic unit-norm random projection per token.

    The token's sha256 digest seeds the RNG, so the same token always maps
    to the same vector, in any process, with no state to ship around.
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def vectors(self, tokens: Sequence[str]) -> np.ndarray:
        rows = []
        for token in tokens:
            vec = self._cache.get(token)
            if vec is None:
                rng = np.random.default_rng(_token_digest(token, f"proj-{self.seed}"))
                vec = rng.standard_normal(self.dim)
                vec /= np.linalg.norm(vec)
                self._cache[token] = vec
            rows.append(vec)
        return np.vstack(rows) if rows else np.zeros((0, self.dim))


class OneHotHashEmbedder:
    """Each token becomes a basis vector chosen by hashing.

    Distinct tokens are orthogonal (up to hash bucket collisions), which
    makes similarity behave like exact token overlap.
    """

    def __init__(self, dim: int = 4096):
        self.dim = dim

    def vectors(self, tokens: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(tokens), self.dim))
        for i, token in enumerate(tokens):
            out[i, _token_digest(token, "onehot") % self.dim] = 1.0
        return out


class HttpEmbedder:
    """Client for an external vector service: POST {"tokens": [...]}."""

    def __init__(self, url: str, timeout_s: float = 30.0, client: httpx.Client | None = None):
        self.url = url
        self._client = client or httpx.Client(timeout=timeout_s)

    def vectors(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            return np.zeros((0, 1))
        try:
            response = self._client.post(self.url, json={"tokens": list(tokens)})
        except httpx.HTTPError as exc:
            raise EmbedderUnavailable(f"cannot reach embedder at {self.url}: {exc}") from exc
        if response.status_code != 200:
            raise EmbedderUnavailable(f"embedder at {self.url} answered HTTP {response.status_code}")
        try:
            vectors = np.asarray(response.json()["vectors"], dtype=float)
        except (ValueError, KeyError, TypeError) as exc:
            raise EmbedderUnavailable(f"embedder payload unreadable: {exc}") from exc
        if vectors.shape[0] != len(tokens):
            raise EmbedderUnavailable(
                f"embedder returned {vectors.shape[0]} vectors for {len(tokens)} tokens"
            )
        return vectors


def similarity(candidate: str, reference: str, embedder: Embedder) -> float:
    """Greedy-matching similarity in [-1, 1]; 1.0 for identical token lists."""
    cand_tokens = [t.lower for t in tokenize(candidate)]
    ref_tokens = [t.lower for t in tokenize(reference)]
    if not cand_tokens and not ref_tokens:
        return 1.0 if candidate == reference else 0.0
    if not cand_tokens or not ref_tokens:
        return 0.0

    cand_vectors = np.asarray(embedder.vectors(cand_tokens), dtype=float)
    ref_vectors = np.asarray(embedder.vectors(ref_tokens), dtype=float)

    def unit(rows: np.ndarray) -> np.ndarray:
        norms = np.linalg.norm(rows, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return rows / norms

    sim = unit(cand_vectors) @ unit(ref_vectors).T
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)

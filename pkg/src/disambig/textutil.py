"""Tokenization and span arithmetic shared by agents and metrics.

All spans that cross module boundaries are byte offsets into the UTF-8
encoding of the text, so the same span means the same thing to every
component regardless of language runtime.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Sequence

# Word = maximal run of alphanumerics. Underscores split, so identifiers
# like "abc123" survive as one token while "orders_v2" becomes two.
_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class Token:
    """One query token with its character and byte extents."""

    text: str
    lower: str
    start: int      # char offset
    end: int        # char offset (exclusive)
    byte_start: int
    byte_end: int


def byte_offset(text: str, char_index: int) -> int:
    """Byte offset of ``char_index`` in the UTF-8 encoding of ``text``."""
    return len(text[:char_index].encode("utf-8"))


def byte_span(text: str, char_start: int, char_end: int) -> tuple[int, int]:
    """Convert a character span to a byte span."""
    return byte_offset(text, char_start), byte_offset(text, char_end)


def span_text(text: str, span: tuple[int, int]) -> str:
    """Decode the substring covered by a byte span."""
    raw = text.encode("utf-8")
    start, end = span
    if not 0 <= start < end <= len(raw):
        raise ValueError(f"span {span} out of range for text of {len(raw)} bytes")
    return raw[start:end].decode("utf-8")


def splice_bytes(text: str, span: tuple[int, int], replacement: str) -> str:
    """Replace the byte span of ``text`` with ``replacement``."""
    raw = text.encode("utf-8")
    start, end = span
    if not 0 <= start < end <= len(raw):
        raise ValueError(f"span {span} out of range for text of {len(raw)} bytes")
    return (raw[:start] + replacement.encode("utf-8") + raw[end:]).decode("utf-8")


def tokenize(text: str) -> list[Token]:
    """Split on non-alphanumerics, keeping alphanumeric identifiers whole."""
    tokens = []
    for m in _WORD_RE.finditer(text):
        bs, be = byte_span(text, m.start(), m.end())
        tokens.append(Token(m.group(), m.group().lower(), m.start(), m.end(), bs, be))
    return tokens


def token_set(text: str) -> set[str]:
    """Lowercased token set of ``text``."""
    return {t.lower for t in tokenize(text)}


@dataclass(frozen=True)
class TermHit:
    """A case-insensitive, word-boundary occurrence of a known term."""

    term: str       # the stored (lowercase) term
    matched: str    # the text as it appears in the query
    start: int      # char offset
    end: int        # char offset (exclusive)


def _term_pattern(term: str) -> re.Pattern[str]:
    return re.compile(rf"(?<!\w){re.escape(term)}(?!\w)", re.IGNORECASE | re.UNICODE)


def find_term_hits(text: str, terms: Sequence[str]) -> list[TermHit]:
    """All boundary-aligned occurrences of ``terms`` in ``text``.

    Hits may overlap each other; callers apply their own overlap policy.
    Output is sorted by (start, -length) so "longest wins at a position"
    policies can scan it directly.
    """
    hits: list[TermHit] = []
    for term in terms:
        for m in _term_pattern(term).finditer(text):
            hits.append(TermHit(term.lower(), m.group(), m.start(), m.end()))
    hits.sort(key=lambda h: (h.start, -(h.end - h.start)))
    return hits


def longest_nonoverlapping(hits: Sequence[TermHit]) -> list[TermHit]:
    """Greedy longest-match-then-leftmost selection over overlapping hits."""
    chosen: list[TermHit] = []
    for hit in sorted(hits, key=lambda h: (-(h.end - h.start), h.start)):
        if all(hit.end <= c.start or hit.start >= c.end for c in chosen):
            chosen.append(hit)
    chosen.sort(key=lambda h: h.start)
    return chosen


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance, iterative two-row DP."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def normalized_edit_distance(a: str, b: str) -> float:
    """Edit distance scaled by the longer string; 0.0 for two empties."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return edit_distance(a, b) / longest


def iter_last_turns(texts: Sequence[str], window: int) -> Iterator[str]:
    """The last ``window`` items of ``texts`` in order."""
    return iter(texts[-window:] if window > 0 else [])

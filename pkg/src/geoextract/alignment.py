"""Order-preserving assignment of toponym names to text positions.

Given the ordered list of names the tagger emitted for a chunk, find
non-overlapping occurrences in the text such that assignment order follows
name order and the number of matched names is maximal.  A greedy
first-occurrence scan gets this wrong whenever the list carries extra
duplicates or slight misordering, so the assignment is solved globally by
dynamic programming with an explicit skip option per name.

Also hosts the phrase-merge pass that unifies nearby mentions separated by
list punctuation or connector words, within and across chunk boundaries.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .corpus import Document, TagSpan, byte_slice, char_to_byte_table

# Gap content allowed between mentions that should merge into one phrase
# tag.  Anything else (real words) keeps the mentions separate.
DEFAULT_CONNECTORS = frozenset({",", "and", "&", "in", "to", "-", "–"})
DEFAULT_MAX_GAP = 24  # characters


class MatchPolicy(Enum):
    EXACT = "exact"
    CASE_INSENSITIVE = "case_insensitive"


@dataclass(frozen=True)
class AlignedName:
    """One input name: either matched to a span or skipped."""

    name: str
    span: TagSpan | None
    policy: MatchPolicy | None

    @property
    def skipped(self) -> bool:
        return self.span is None


@dataclass(frozen=True)
class Assignment:
    entries: tuple[AlignedName, ...]
    matched_count: int

    @property
    def spans(self) -> list[TagSpan]:
        return [e.span for e in self.entries if e.span is not None]


def _occurrences(text: str, name: str) -> tuple[list[int], MatchPolicy]:
    """All (possibly overlapping) char offsets of *name* in *text*.

    Exact occurrences win; only a name with zero exact occurrences is
    retried case-insensitively.
    """
    exact = []
    i = text.find(name)
    while i != -1:
        exact.append(i)
        i = text.find(name, i + 1)
    if exact:
        return exact, MatchPolicy.EXACT
    pattern = re.compile(f"(?=({re.escape(name)}))", re.IGNORECASE)
    loose = [m.start() for m in pattern.finditer(text)]
    return loose, MatchPolicy.CASE_INSENSITIVE


def align(text: str, names: list[str], search_from: int = 0) -> Assignment:
    """Globally optimal order-preserving assignment of names to occurrences.

    Offsets are byte offsets (consistent with TagSpan); occurrences are
    searched at or after *search_from*.  Among assignments with maximal
    matched count, the one with the lexicographically smallest sequence of
    span start offsets wins, preferring to match earlier names on exact
    ties.  Whitespace-only names are skipped outright.
    """
    table = char_to_byte_table(text)
    byte_to_char = {b: c for c, b in enumerate(table)}
    if search_from not in byte_to_char:
        raise ValueError(f"search_from {search_from} is not a char boundary")
    start_char = byte_to_char[search_from]

    occs: list[list[int]] = []
    lengths: list[int] = []
    policies: list[MatchPolicy | None] = []
    for name in names:
        if not name or name.isspace():
            occs.append([])
            lengths.append(0)
            policies.append(None)
            continue
        found, policy = _occurrences(text, name)
        occs.append([p for p in found if p >= start_char])
        lengths.append(len(name))
        policies.append(policy)

    m = len(names)
    # value(i, pos) = (-matched, start offsets tuple) for names[i:] placed at
    # char positions >= pos, minimized lexicographically.
    cache: dict[tuple[int, int], tuple[int, tuple[int, ...]]] = {}

    def value(i: int, pos: int) -> tuple[int, tuple[int, ...]]:
        if i == m:
            return (0, ())
        key = (i, pos)
        hit = cache.get(key)
        if hit is not None:
            return hit
        best = None
        for s in occs[i]:
            if s < pos:
                continue
            sub = value(i + 1, s + lengths[i])
            cand = (sub[0] - 1, (s,) + sub[1])
            if best is None or cand < best:
                best = cand
        skip = value(i + 1, pos)
        if best is None or skip < best:
            best = skip
        cache[key] = best
        return best

    _, starts = value(0, start_char)

    # replay the choices to attach spans to names
    entries: list[AlignedName] = []
    remaining = list(starts)
    pos = start_char
    i = 0
    while i < m:
        matched_here = False
        if remaining:
            s = remaining[0]
            if s >= pos and s in occs[i]:
                # matching name i at s must reproduce the optimal value
                sub = value(i + 1, s + lengths[i])
                if (sub[0] - 1, (s,) + sub[1]) == value(i, pos):
                    b_start = table[s]
                    b_end = table[s + lengths[i]]
                    span = TagSpan(
                        start=b_start,
                        end=b_end,
                        surface=text[s : s + lengths[i]],
                    )
                    entries.append(AlignedName(names[i], span, policies[i]))
                    remaining.pop(0)
                    pos = s + lengths[i]
                    matched_here = True
        if not matched_here:
            entries.append(AlignedName(names[i], None, None))
        i += 1

    return Assignment(entries=tuple(entries), matched_count=len(starts))


def greedy_align(text: str, names: list[str], search_from: int = 0) -> Assignment:
    """First-occurrence-after-previous-match baseline (for comparison)."""
    table = char_to_byte_table(text)
    byte_to_char = {b: c for c, b in enumerate(table)}
    pos = byte_to_char[search_from]
    entries = []
    matched = 0
    for name in names:
        if not name or name.isspace():
            entries.append(AlignedName(name, None, None))
            continue
        found, policy = _occurrences(text, name)
        nxt = next((s for s in found if s >= pos), None)
        if nxt is None:
            entries.append(AlignedName(name, None, None))
            continue
        span = TagSpan(
            start=table[nxt],
            end=table[nxt + len(name)],
            surface=text[nxt : nxt + len(name)],
        )
        entries.append(AlignedName(name, span, policy))
        matched += 1
        pos = nxt + len(name)
    return Assignment(entries=tuple(entries), matched_count=matched)


# ── phrase merging ───────────────────────────────────────────────────────

_GAP_PUNCT = re.compile(r"([,&\-–])")


def _gap_is_connector(gap: str, connectors: frozenset[str]) -> bool:
    if gap == "":
        return True
    tokens = _GAP_PUNCT.sub(r" \1 ", gap).split()
    return all(
        tok in connectors or tok.lower() in connectors for tok in tokens
    )


def merge_adjacent(
    text: str,
    spans: list[TagSpan],
    connectors: frozenset[str] = DEFAULT_CONNECTORS,
    max_gap: int = DEFAULT_MAX_GAP,
) -> list[TagSpan]:
    """Merge consecutive spans whose gap is only connector material.

    Input spans must be sorted and non-overlapping.  The merged surface is
    the exact document substring from the first start to the last end, so
    list phrases like "Milan, Naples, and Rome" become one tag.
    """
    if not spans:
        return []
    merged: list[TagSpan] = [spans[0]]
    for span in spans[1:]:
        prev = merged[-1]
        gap = byte_slice(text, prev.end, span.start)
        if len(gap) <= max_gap and _gap_is_connector(gap, connectors):
            merged[-1] = TagSpan(
                start=prev.start,
                end=span.end,
                surface=byte_slice(text, prev.start, span.end),
                literal=prev.literal,
            )
        else:
            merged.append(span)
    return merged


def merge_across_chunks(
    doc: Document,
    per_chunk_spans: list[list[TagSpan]],
    connectors: frozenset[str] = DEFAULT_CONNECTORS,
    max_gap: int = DEFAULT_MAX_GAP,
) -> list[TagSpan]:
    """Merge over the whole document so phrases split by a chunk boundary
    unify.  Chunk spans must already carry document offsets."""
    all_spans = sorted(
        (s for spans in per_chunk_spans for s in spans),
        key=lambda s: (s.start, s.end),
    )
    return merge_adjacent(doc.text, all_spans, connectors, max_gap)

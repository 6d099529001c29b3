"""Length-windowed document chunking.

A document is split at occurrences of one separator from a fixed preference
hierarchy, and the resulting pieces are regrouped into contiguous chunks so
that every chunk length falls inside a [min_len, max_len] character window.
Separators are tried in preference order; the first separator admitting a
valid regrouping wins, and among that separator's valid regroupings the one
with minimal population variance of chunk lengths is returned.

Chunk boundaries carry byte offsets into the document so chunk-relative tag
offsets can be mapped back losslessly.  Separator text between two chunks is
consumed (belongs to neither); separator occurrences inside a chunk are part
of its text, since a chunk is always a contiguous slice of the document.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Document, char_to_byte_table

# Most preferred first.  Tried sequentially; later entries are only consulted
# when every earlier one fails to produce an in-window regrouping.
SEPARATORS: tuple[str, ...] = ("\n\n", ". ", "\n", "\t", ", ", " ")

DEFAULT_WINDOWS = {
    "json": (1000, 2000),
    "markdown": (200, 500),
}


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    start: int  # byte offset into the document
    end: int    # byte offset, exclusive
    text: str


@dataclass(frozen=True)
class ChunkPlan:
    separator: str | None  # None for whole-document and fallback plans
    chunks: tuple[Chunk, ...]
    length_variance: float  # population variance of chunk char lengths
    fallback: bool = False


def candidate_separators() -> list[str]:
    """The separator hierarchy, most preferred first."""
    return list(SEPARATORS)


def _split_positions(text: str, sep: str) -> list[int]:
    """Char offsets of non-overlapping leftmost occurrences of *sep*."""
    positions = []
    i = text.find(sep)
    while i != -1:
        positions.append(i)
        i = text.find(sep, i + len(sep))
    return positions


def _variance(lengths: list[int]) -> float:
    k = len(lengths)
    mean = sum(lengths) / k
    return sum((x - mean) ** 2 for x in lengths) / k


def _pieces(text: str, sep: str) -> list[tuple[int, int]]:
    """Char intervals between separator occurrences (may include empties)."""
    cuts = _split_positions(text, sep)
    pieces = []
    prev = 0
    for c in cuts:
        pieces.append((prev, c))
        prev = c + len(sep)
    pieces.append((prev, len(text)))
    return pieces


def _best_grouping(
    pieces: list[tuple[int, int]],
    min_len: int,
    max_len: int,
) -> list[tuple[int, int]] | None:
    """Variance-minimizing partition of pieces into in-window chunks.

    Returns the char intervals of the chosen chunks, or None when no
    partition keeps every chunk inside [min_len, max_len].  Ties on variance
    prefer fewer chunks, then the lexicographically smallest sequence of
    chunk start offsets.

    For a fixed chunk count k the total covered length is constant (each of
    the k-1 consumed separators removes the same number of characters), so
    minimizing variance reduces to minimizing the sum of squared chunk
    lengths, a textbook interval-partition DP.
    """
    n = len(pieces)
    starts = [p[0] for p in pieces]
    ends = [p[1] for p in pieces]
    total = ends[-1] - starts[0]

    if total < min_len:
        return None

    # Feasible chunk counts: with k chunks the covered length shrinks by the
    # consumed separators, so k is bounded by total/min_len.
    max_k = min(n, total // max(min_len, 1))
    INF = float("inf")

    # g[t][i] = minimal sum of squared lengths covering pieces i..n-1 with
    # exactly t chunks; computed backward so the forward reconstruction can
    # prefer early boundaries.  One table serves every candidate k.
    g = [[INF] * (n + 1) for _ in range(max_k + 1)]
    g[0][n] = 0.0
    for t in range(1, max_k + 1):
        row_t = g[t]
        row_prev = g[t - 1]
        for i in range(n - 1, -1, -1):
            best_cost = INF
            si = starts[i]
            for j in range(i, n):
                length = ends[j] - si
                if length > max_len:
                    break
                if length < min_len:
                    continue
                prev = row_prev[j + 1]
                if prev == INF:
                    continue
                cost = prev + length * length
                if cost < best_cost:
                    best_cost = cost
            row_t[i] = best_cost

    best: tuple[float, int] | None = None  # (variance, k)
    for k in range(1, max_k + 1):
        if g[k][0] == INF:
            continue
        var = g[k][0] / k - (sum_len_for_k(total, k, pieces) / k) ** 2
        if var < 0:  # float rounding guard
            var = 0.0
        if best is None or var < best[0] - 1e-9:
            best = (var, k)
        if best[0] == 0.0:
            # variance cannot improve below zero, and larger k loses the
            # fewer-chunks tiebreak
            break

    if best is None:
        return None

    _, k = best

    # Forward walk: at each step take the smallest feasible boundary that
    # preserves optimality, which yields the lexicographically smallest
    # chunk-start sequence.
    out: list[tuple[int, int]] = []
    i = 0
    for t in range(k, 0, -1):
        target = g[t][i]
        si = starts[i]
        for j in range(i, n):
            length = ends[j] - si
            if length > max_len:
                break
            if length < min_len:
                continue
            remainder = g[t - 1][j + 1]
            if remainder == float("inf"):
                continue
            if abs((remainder + length * length) - target) <= 1e-6:
                out.append((si, ends[j]))
                i = j + 1
                break
        else:
            raise AssertionError("grouping reconstruction failed")
    return out


def sum_len_for_k(total: int, k: int, pieces: list[tuple[int, int]]) -> int:
    """Total chunk text length for a k-chunk partition of these pieces."""
    if k == 1:
        return total
    # every boundary consumes one separator; separator width is the gap
    # between consecutive pieces (identical for all boundaries of one sep)
    sep_width = pieces[1][0] - pieces[0][1] if len(pieces) > 1 else 0
    return total - (k - 1) * sep_width


def _to_chunks(doc: Document, intervals: list[tuple[int, int]]) -> tuple[Chunk, ...]:
    table = char_to_byte_table(doc.text)
    return tuple(
        Chunk(
            doc_id=doc.id,
            start=table[a],
            end=table[b],
            text=doc.text[a:b],
        )
        for a, b in intervals
    )


def try_separator(
    doc: Document,
    sep: str,
    min_len: int,
    max_len: int,
) -> ChunkPlan | None:
    """Split on *sep* and regroup into the minimal-variance in-window plan.

    Returns None when no regrouping of the separator's pieces satisfies the
    length window.
    """
    if sep not in doc.text:
        # one piece; valid only if the whole text fits the window
        if min_len <= len(doc.text) <= max_len:
            whole = _to_chunks(doc, [(0, len(doc.text))])
            return ChunkPlan(separator=sep, chunks=whole, length_variance=0.0)
        return None
    pieces = _pieces(doc.text, sep)
    grouping = _best_grouping(pieces, min_len, max_len)
    if grouping is None:
        return None
    chunks = _to_chunks(doc, grouping)
    return ChunkPlan(
        separator=sep,
        chunks=chunks,
        length_variance=_variance([b - a for a, b in grouping]),
    )


def _fallback_plan(doc: Document, max_len: int) -> ChunkPlan:
    """Hard split at the last whitespace before each max_len boundary.

    Never fails: when a window contains no whitespace the cut lands exactly
    at max_len.  The whitespace at a cut is consumed like a separator.
    """
    text = doc.text
    intervals: list[tuple[int, int]] = []
    pos = 0
    n = len(text)
    while pos < n:
        if n - pos <= max_len:
            intervals.append((pos, n))
            break
        window_end = pos + max_len
        cut = -1
        for i in range(window_end, pos, -1):
            if text[i - 1].isspace():
                cut = i
                break
        if cut <= pos + 1:
            intervals.append((pos, window_end))
            pos = window_end
        else:
            intervals.append((pos, cut - 1))  # consume the whitespace
            pos = cut
    chunks = _to_chunks(doc, intervals)
    return ChunkPlan(
        separator=None,
        chunks=chunks,
        length_variance=_variance([b - a for a, b in intervals]),
        fallback=True,
    )


def plan_chunks(doc: Document, min_len: int, max_len: int) -> ChunkPlan:
    """Chunk *doc* into the length window using the separator hierarchy.

    Short documents (<= max_len) come back as one whole-text chunk; when the
    document is also shorter than min_len the plan is marked fallback since
    the window cannot be honored.  Separators are tried most preferred
    first; if none admits a valid regrouping, a whitespace hard-split
    fallback guarantees chunks of at most max_len.
    """
    if min_len >= max_len:
        raise ValueError("min_len must be < max_len")
    text = doc.text
    if len(text) <= max_len:
        whole = _to_chunks(doc, [(0, len(text))])
        return ChunkPlan(
            separator=None,
            chunks=whole,
            length_variance=0.0,
            fallback=len(text) < min_len,
        )
    for sep in SEPARATORS:
        plan = try_separator(doc, sep, min_len, max_len)
        if plan is not None:
            return plan
    return _fallback_plan(doc, max_len)

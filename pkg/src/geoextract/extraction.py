"""Parsers for the model's NER output.

Two formats come back from the tagger: a JSON list of location strings
(no positions), and a tagged reproduction of the input chunk where each
toponym is wrapped in @@ ... ## delimiters.  The tagged format yields
positioned spans only when the model reproduced the chunk byte-for-byte
after stripping delimiter pairs; otherwise the delimited surfaces are
demoted to an ordered name list for downstream alignment.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum

from .chunking import Chunk
from .corpus import TagSpan, byte_len

log = logging.getLogger(__name__)

OPEN_DELIM = "@@"
CLOSE_DELIM = "##"


class TagFormatError(ValueError):
    """Model output could not be parsed; carries the raw output."""

    def __init__(self, message: str, raw_output: str) -> None:
        super().__init__(message)
        self.raw_output = raw_output


class ExtractionKind(Enum):
    POSITIONED_SPANS = "positioned_spans"
    NAME_LIST_ONLY = "name_list_only"


@dataclass(frozen=True)
class ExtractionResult:
    kind: ExtractionKind
    spans: tuple[TagSpan, ...] = ()       # chunk-relative byte offsets
    names: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind is ExtractionKind.POSITIONED_SPANS and self.names:
            raise ValueError("positioned result must not carry names")
        if self.kind is ExtractionKind.NAME_LIST_ONLY and self.spans:
            raise ValueError("name-list result must not carry spans")


# ── JSON list format ─────────────────────────────────────────────────────

def parse_json_tags(raw_output: str) -> list[str]:
    """Extract the first well-formed JSON array of strings from *raw_output*.

    Tolerates surrounding prose and code fences.  Order and duplicates are
    preserved exactly as emitted.
    """
    decoder = json.JSONDecoder()
    idx = raw_output.find("[")
    while idx != -1:
        try:
            value, _ = decoder.raw_decode(raw_output, idx)
        except json.JSONDecodeError:
            value = None
        if isinstance(value, list) and all(isinstance(x, str) for x in value):
            return list(value)
        idx = raw_output.find("[", idx + 1)
    raise TagFormatError("no JSON array of strings in model output", raw_output)


# ── markdown tagged format ───────────────────────────────────────────────

def _scan_delimiters(raw: str) -> list[tuple[int, str]]:
    """(position, token) for every @@ / ## occurrence, left to right."""
    tokens = []
    i = 0
    n = len(raw)
    while i < n - 1:
        pair = raw[i : i + 2]
        if pair == OPEN_DELIM or pair == CLOSE_DELIM:
            tokens.append((i, pair))
            i += 2
        else:
            i += 1
    return tokens


def _dangling_name(raw: str, open_end: int) -> str:
    """Content after a dangling opener up to the next whitespace boundary."""
    j = open_end
    while j < len(raw) and not raw[j].isspace():
        j += 1
    return raw[open_end:j]


def parse_markdown_tags(input_chunk: str, raw_output: str) -> ExtractionResult:
    """Parse delimited toponyms out of a tagged reproduction of the chunk.

    Pairs delimiters innermost-first: a ## closes the nearest unmatched @@,
    and any earlier unmatched openers are flushed as dangling (their content
    up to the next whitespace becomes a plain name, with a warning).  After
    removing the matched pairs the text must equal *input_chunk* exactly to
    yield positioned spans; any mismatch falls back to a name list.
    """
    tokens = _scan_delimiters(raw_output)
    pairs: list[tuple[int, int]] = []   # (open position, close position)
    pending: list[int] = []             # positions of unmatched openers
    dangling: list[int] = []
    warnings: list[str] = []

    for pos, tok in tokens:
        if tok == OPEN_DELIM:
            pending.append(pos)
        else:
            if not pending:
                continue  # stray closer stays literal text
            opener = pending.pop()
            if pending:
                # nested/overlapping openers: keep the innermost complete
                # pair, flush the rest as dangling
                dangling.extend(pending)
                pending.clear()
                warnings.append("overlapping delimiters; kept innermost pair")
            pairs.append((opener, pos))
    dangling.extend(pending)

    # ordered extraction events: complete pairs and dangling openers
    events = sorted(
        [(a, b, True) for a, b in pairs] + [(a, a, False) for a in dangling]
    )

    names: list[str] = []
    stripped_parts: list[str] = []
    rel_spans: list[tuple[int, str]] = []  # (char start in stripped text, surface)
    cursor = 0
    stripped_len = 0
    for a, b, complete in events:
        stripped_parts.append(raw_output[cursor:a])
        stripped_len += a - cursor
        if complete:
            surface = raw_output[a + 2 : b]
            if surface:
                names.append(surface)
                rel_spans.append((stripped_len, surface))
            stripped_parts.append(surface)
            stripped_len += len(surface)
            cursor = b + 2
        else:
            name = _dangling_name(raw_output, a + 2)
            if name:
                names.append(name)
            warnings.append(f"dangling {OPEN_DELIM} before {name!r}")
            # a dangling opener stays literal text; if the source chunk
            # really contained "@@" the equality check below still passes
            stripped_parts.append(OPEN_DELIM)
            stripped_len += 2
            cursor = a + 2
    stripped_parts.append(raw_output[cursor:])
    stripped = "".join(stripped_parts)

    for w in warnings:
        log.warning("markdown tag parse: %s", w)

    if stripped == input_chunk:
        ascii_text = input_chunk.isascii()
        spans = []
        for char_start, surface in rel_spans:
            if ascii_text:
                start = char_start
                end = char_start + len(surface)
            else:
                start = byte_len(stripped[:char_start])
                end = start + byte_len(surface)
            spans.append(TagSpan(start=start, end=end, surface=surface))
        return ExtractionResult(
            kind=ExtractionKind.POSITIONED_SPANS,
            spans=tuple(spans),
            warnings=tuple(warnings),
        )

    return ExtractionResult(
        kind=ExtractionKind.NAME_LIST_ONLY,
        names=tuple(n for n in names if n),
        warnings=tuple(warnings),
    )


# ── chunk → document offset mapping ──────────────────────────────────────

def to_document_offsets(
    chunk: Chunk,
    spans: tuple[TagSpan, ...] | list[TagSpan],
    document_text: str | None = None,
) -> list[TagSpan]:
    """Shift chunk-relative spans by the chunk's document offset.

    When *document_text* is given, every shifted span is re-verified against
    it; a mismatch means the caller mixed up chunks and is an internal
    consistency error.
    """
    chunk_bytes = byte_len(chunk.text)
    out = []
    for span in spans:
        if span.end > chunk_bytes:
            raise ValueError(
                f"span ({span.start}, {span.end}) exceeds chunk of {chunk_bytes} bytes"
            )
        shifted = TagSpan(
            start=span.start + chunk.start,
            end=span.end + chunk.start,
            surface=span.surface,
            literal=span.literal,
        )
        if document_text is not None:
            shifted.verify(document_text)
        out.append(shifted)
    return out

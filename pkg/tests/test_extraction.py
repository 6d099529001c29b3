import random

import pytest

from geoextract.chunking import Chunk
from geoextract.corpus import TagSpan
from geoextract.extraction import (
    ExtractionKind,
    TagFormatError,
    parse_json_tags,
    parse_markdown_tags,
    to_document_offsets,
)


# ── JSON list parsing ────────────────────────────────────────────────────

def test_plain_array():
    assert parse_json_tags('["Milan","Naples","Rome"]') == ["Milan", "Naples", "Rome"]


def test_fenced_array_keeps_duplicates():
    assert parse_json_tags('```json\n["Goma","Goma"]\n```') == ["Goma", "Goma"]


def test_prose_wrapped_array():
    raw = 'Sure! Here are the locations: ["Goma", "Bukavu"] — let me know.'
    assert parse_json_tags(raw) == ["Goma", "Bukavu"]


def test_no_array_raises_with_raw():
    with pytest.raises(TagFormatError) as err:
        parse_json_tags("no locations found")
    assert err.value.raw_output == "no locations found"


def test_first_string_array_wins():
    raw = '[1, 2] then ["Goma"] then ["Kigali"]'
    assert parse_json_tags(raw) == ["Goma"]


def test_empty_array_ok():
    assert parse_json_tags("[]") == []


# ── markdown parsing ─────────────────────────────────────────────────────

def test_positioned_single_tag():
    result = parse_markdown_tags("Goma is calm.", "@@Goma## is calm.")
    assert result.kind is ExtractionKind.POSITIONED_SPANS
    assert result.spans == (TagSpan(0, 4, "Goma"),)


def test_dropped_character_falls_back_to_list():
    result = parse_markdown_tags("Goma is calm.", "@@Goma## is calm")
    assert result.kind is ExtractionKind.NAME_LIST_ONLY
    assert result.names == ("Goma",)


def test_no_delimiters_equal_text_is_empty_positioned():
    result = parse_markdown_tags("Goma is calm.", "Goma is calm.")
    assert result.kind is ExtractionKind.POSITIONED_SPANS
    assert result.spans == ()


def test_multiple_tags_positions():
    chunk = "From Goma to Bukavu."
    tagged = "From @@Goma## to @@Bukavu##."
    result = parse_markdown_tags(chunk, tagged)
    assert result.kind is ExtractionKind.POSITIONED_SPANS
    assert [(s.start, s.end) for s in result.spans] == [(5, 9), (13, 19)]
    for s in result.spans:
        assert chunk[s.start:s.end] == s.surface


def test_dangling_opener_warns_and_falls_back():
    result = parse_markdown_tags("to Goma now", "to @@Goma now")
    assert result.kind is ExtractionKind.NAME_LIST_ONLY
    assert result.names == ("Goma",)
    assert any("dangling" in w for w in result.warnings)


def test_literal_delimiter_in_source_stays_verbatim():
    chunk = "ping @@ops about Goma"
    tagged = "ping @@ops about @@Goma##"
    result = parse_markdown_tags(chunk, tagged)
    assert result.kind is ExtractionKind.POSITIONED_SPANS
    assert result.spans == (TagSpan(17, 21, "Goma"),)


def test_overlapping_delimiters_keep_innermost():
    chunk = "x Goma y"
    result = parse_markdown_tags(chunk, "@@x @@Goma## y##")
    # inner pair survives; outer opener dangles -> reproduction mismatch
    assert result.kind is ExtractionKind.NAME_LIST_ONLY
    assert "Goma" in result.names
    assert any("overlap" in w or "dangling" in w for w in result.warnings)


def test_non_ascii_byte_offsets():
    chunk = "Chuva em São Paulo hoje."
    tagged = "Chuva em @@São Paulo## hoje."
    result = parse_markdown_tags(chunk, tagged)
    assert result.kind is ExtractionKind.POSITIONED_SPANS
    (span,) = result.spans
    raw = chunk.encode("utf-8")
    assert raw[span.start:span.end].decode("utf-8") == "São Paulo"


def insert_delimiters(text: str, spans: list[tuple[int, int]]) -> str:
    out = []
    prev = 0
    for start, end in spans:
        out.append(text[prev:start])
        out.append("@@" + text[start:end] + "##")
        prev = end
    out.append(text[prev:])
    return "".join(out)


def random_span_fixture(rng: random.Random) -> tuple[str, list[tuple[int, int]]]:
    n = rng.randint(8, 60)
    text = "".join(rng.choice("abcdef ,.") for _ in range(n))
    spans = []
    pos = 0
    while pos < n - 2 and len(spans) < 5:
        start = rng.randint(pos, min(pos + 8, n - 2))
        end = rng.randint(start + 1, min(start + 6, n))
        if rng.random() < 0.6:
            spans.append((start, end))
        pos = end + 1
    return text, spans


@pytest.mark.parametrize("seed", range(25))
def test_markdown_round_trip_random(seed):
    rng = random.Random(seed)
    for _ in range(10):
        text, spans = random_span_fixture(rng)
        tagged = insert_delimiters(text, spans)
        result = parse_markdown_tags(text, tagged)
        assert result.kind is ExtractionKind.POSITIONED_SPANS
        assert [(s.start, s.end) for s in result.spans] == spans


@pytest.mark.parametrize("seed", range(10))
def test_single_character_corruption_falls_back(seed):
    rng = random.Random(500 + seed)
    text, spans = random_span_fixture(rng)
    while not spans:
        text, spans = random_span_fixture(rng)
    tagged = insert_delimiters(text, spans)
    idx = rng.randrange(len(tagged))
    original = tagged[idx]
    replacement = rng.choice([c for c in "zqy" if c != original])
    corrupted = tagged[:idx] + replacement + tagged[idx + 1:]
    result = parse_markdown_tags(text, corrupted)
    assert result.kind is ExtractionKind.NAME_LIST_ONLY


# ── offset shifting ──────────────────────────────────────────────────────

def make_chunk(doc_text: str, start: int, end: int) -> Chunk:
    return Chunk(doc_id="d", start=start, end=end, text=doc_text[start:end])


def test_shift_by_chunk_offset():
    doc_text = "x" * 100 + "Goma is calm."
    chunk = make_chunk(doc_text, 100, 113)
    shifted = to_document_offsets(chunk, [TagSpan(0, 4, "Goma")], doc_text)
    assert shifted == [TagSpan(100, 104, "Goma")]


def test_zero_offset_chunk_is_identity():
    doc_text = "Goma is calm."
    chunk = make_chunk(doc_text, 0, len(doc_text))
    shifted = to_document_offsets(chunk, [TagSpan(5, 7, "is")], doc_text)
    assert shifted == [TagSpan(5, 7, "is")]


def test_span_exceeding_chunk_rejected():
    chunk = make_chunk("Goma is calm.", 0, 4)
    with pytest.raises(ValueError, match="exceeds chunk"):
        to_document_offsets(chunk, [TagSpan(0, 10, "Goma is ca")])

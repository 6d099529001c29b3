"""Corpus data model and JSONL I/O.

Documents, tag spans, gold geocodes and agent selections all live in
line-oriented JSON files so large corpora can be streamed.  Span offsets are
byte offsets into the UTF-8 encoding of the document text; every loader that
has access to the document re-verifies the surface string against those
offsets so offset drift is caught at the boundary instead of deep inside the
pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator


class CorpusError(ValueError):
    """Raised for malformed corpus files or records violating invariants."""


# ── byte-offset helpers ──────────────────────────────────────────────────

def byte_len(text: str) -> int:
    """Length of *text* in UTF-8 bytes."""
    if text.isascii():
        return len(text)
    return len(text.encode("utf-8"))


def byte_slice(text: str, start: int, end: int) -> str:
    """Substring of *text* addressed by UTF-8 byte offsets [start, end)."""
    if text.isascii():
        return text[start:end]
    return text.encode("utf-8")[start:end].decode("utf-8")


def char_to_byte_table(text: str) -> list[int]:
    """byte offset of every char index, plus the total length at the end."""
    if text.isascii():
        return list(range(len(text) + 1))
    offsets = [0]
    total = 0
    for ch in text:
        total += len(ch.encode("utf-8"))
        offsets.append(total)
    return offsets


# ── record types ─────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Document:
    id: str
    text: str
    lang: str = "en"
    source: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("document id must be non-empty")
        if not self.text:
            raise CorpusError(f"document {self.id!r}: text must be non-empty")


@dataclass(frozen=True, order=True)
class TagSpan:
    """A literal-toponym mention: byte range plus the exact surface string."""

    start: int
    end: int
    surface: str
    literal: bool | None = None

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise CorpusError(f"invalid span offsets ({self.start}, {self.end})")

    def verify(self, text: str) -> None:
        """Check that this span addresses *text* consistently."""
        n = byte_len(text)
        if self.end > n:
            raise CorpusError(
                f"span ({self.start}, {self.end}) out of bounds for text of {n} bytes"
            )
        actual = byte_slice(text, self.start, self.end)
        if actual != self.surface:
            raise CorpusError(
                f"span ({self.start}, {self.end}): surface {self.surface!r} "
                f"does not match text {actual!r}"
            )

    def overlaps(self, other: "TagSpan") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class GoldGeocode:
    """A gold-standard geocoding: a span and its admissible geoname ids."""

    span: TagSpan
    geoname_ids: frozenset[int]

    def __post_init__(self) -> None:
        if not self.geoname_ids:
            raise CorpusError("gold geocode must carry at least one geoname id")
        if any(g <= 0 for g in self.geoname_ids):
            raise CorpusError("geoname ids must be positive")


@dataclass(frozen=True)
class SelectionRecord:
    """One geocoding prediction: a span resolved to a geoname id (or -1)."""

    doc_id: str
    span: TagSpan
    place: str
    geonameid: int
    literal: bool = True
    context: str = ""


# ── JSONL plumbing ───────────────────────────────────────────────────────

def _iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def _write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            count += 1
    return count


# ── documents ────────────────────────────────────────────────────────────

def load_documents(path: str | Path) -> list[Document]:
    """Load documents.jsonl, preserving order and rejecting duplicate ids."""
    docs: list[Document] = []
    seen: set[str] = set()
    for lineno, obj in _iter_jsonl(path):
        try:
            doc = Document(
                id=obj["id"],
                text=obj["text"],
                lang=obj.get("lang", "en"),
                source=obj.get("source"),
            )
        except KeyError as exc:
            raise CorpusError(f"{path}:{lineno}: missing field {exc.args[0]!r}") from exc
        if doc.id in seen:
            raise CorpusError(f"{path}:{lineno}: duplicate document id {doc.id!r}")
        seen.add(doc.id)
        docs.append(doc)
    return docs


def save_documents(path: str | Path, docs: Iterable[Document]) -> int:
    def to_rec(d: Document) -> dict:
        rec = {"id": d.id, "text": d.text, "lang": d.lang}
        if d.source is not None:
            rec["source"] = d.source
        return rec

    return _write_jsonl(path, (to_rec(d) for d in docs))


# ── spans ────────────────────────────────────────────────────────────────

def _span_from_obj(obj: dict, path, lineno) -> tuple[str, TagSpan]:
    try:
        doc_id = obj["doc_id"]
        span = TagSpan(
            start=int(obj["start"]),
            end=int(obj["end"]),
            surface=obj["surface"],
            literal=obj.get("literal"),
        )
    except KeyError as exc:
        raise CorpusError(f"{path}:{lineno}: missing field {exc.args[0]!r}") from exc
    except CorpusError as exc:
        raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return doc_id, span


def load_spans(
    path: str | Path,
    documents: dict[str, Document] | None = None,
) -> dict[str, list[TagSpan]]:
    """Load spans.jsonl grouped by doc id, each list sorted by start offset.

    When *documents* is given every span is re-verified against its document
    text; an unknown doc id or a surface mismatch is an error.
    """
    by_doc: dict[str, list[TagSpan]] = {}
    for lineno, obj in _iter_jsonl(path):
        doc_id, span = _span_from_obj(obj, path, lineno)
        if documents is not None:
            if doc_id not in documents:
                raise CorpusError(f"{path}:{lineno}: unknown doc id {doc_id!r}")
            try:
                span.verify(documents[doc_id].text)
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: doc {doc_id!r}: {exc}") from exc
        by_doc.setdefault(doc_id, []).append(span)
    for spans in by_doc.values():
        spans.sort(key=lambda s: (s.start, s.end))
    return by_doc


def save_spans(path: str | Path, spans_by_doc: dict[str, list[TagSpan]]) -> int:
    def records():
        for doc_id in sorted(spans_by_doc):
            for s in sorted(spans_by_doc[doc_id]):
                rec = {"doc_id": doc_id, "start": s.start, "end": s.end, "surface": s.surface}
                if s.literal is not None:
                    rec["literal"] = s.literal
                yield rec

    return _write_jsonl(path, records())


# ── gold geocodes ────────────────────────────────────────────────────────

def load_gold_geocodes(path: str | Path) -> dict[str, list[GoldGeocode]]:
    by_doc: dict[str, list[GoldGeocode]] = {}
    for lineno, obj in _iter_jsonl(path):
        doc_id, span = _span_from_obj(obj, path, lineno)
        ids = obj.get("geoname_ids")
        if not isinstance(ids, list) or not ids:
            raise CorpusError(f"{path}:{lineno}: geoname_ids must be a non-empty list")
        try:
            gold = GoldGeocode(span=span, geoname_ids=frozenset(int(g) for g in ids))
        except CorpusError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from exc
        by_doc.setdefault(doc_id, []).append(gold)
    for golds in by_doc.values():
        golds.sort(key=lambda g: g.span)
    return by_doc


def save_gold_geocodes(path: str | Path, golds_by_doc: dict[str, list[GoldGeocode]]) -> int:
    def records():
        for doc_id in sorted(golds_by_doc):
            for g in sorted(golds_by_doc[doc_id], key=lambda g: g.span):
                yield {
                    "doc_id": doc_id,
                    "start": g.span.start,
                    "end": g.span.end,
                    "surface": g.span.surface,
                    "geoname_ids": sorted(g.geoname_ids),
                }

    return _write_jsonl(path, records())


# ── selections ───────────────────────────────────────────────────────────

def load_selections(path: str | Path) -> list[SelectionRecord]:
    out: list[SelectionRecord] = []
    for lineno, obj in _iter_jsonl(path):
        try:
            # the record's literal flag belongs to the selection, not the span
            doc_id = obj["doc_id"]
            span = TagSpan(start=int(obj["start"]), end=int(obj["end"]),
                           surface=obj["surface"])
            out.append(
                SelectionRecord(
                    doc_id=doc_id,
                    span=span,
                    place=obj["place"],
                    geonameid=int(obj["geonameid"]),
                    literal=bool(obj.get("literal", True)),
                    context=obj.get("context", ""),
                )
            )
        except KeyError as exc:
            raise CorpusError(f"{path}:{lineno}: missing field {exc.args[0]!r}") from exc
    return out


def save_selections(path: str | Path, selections: Iterable[SelectionRecord]) -> int:
    def records():
        for s in selections:
            yield {
                "doc_id": s.doc_id,
                "start": s.span.start,
                "end": s.span.end,
                "surface": s.span.surface,
                "place": s.place,
                "geonameid": s.geonameid,
                "literal": s.literal,
                "context": s.context,
            }

    return _write_jsonl(path, records())

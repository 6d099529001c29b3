"""Reconciliation sessions for annotation improvement.

A session confronts two tag sets for one document.  Spans identical in both
sets are agreed; the rest are clustered into conflicts by overlap (transitive
closure), each resolved by a human picking side A, side B, both, or neither.
Sessions persist to disk after every mutation, one JSON document each, with
an optimistic version counter guarding concurrent writers.
"""

from __future__ import annotations

import json
import os
import uuid
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .corpus import Document, SelectionRecord, TagSpan


class AnnotationError(ValueError):
    pass


class StaleVersionError(AnnotationError):
    """Optimistic concurrency check failed; reload and retry."""


class UnresolvedConflictsError(AnnotationError):
    def __init__(self, conflict_ids: list[int]) -> None:
        super().__init__(f"unresolved conflicts remain: {conflict_ids}")
        self.conflict_ids = conflict_ids


class Resolution(str, Enum):
    A = "A"
    B = "B"
    BOTH = "Both"
    NEITHER = "Neither"


@dataclass(frozen=True)
class Conflict:
    id: int
    doc_id: str
    region_start: int
    region_end: int
    option_a: tuple[TagSpan, ...]
    option_b: tuple[TagSpan, ...]
    resolution: Resolution | None = None
    resolved_by: str | None = None


@dataclass
class Session:
    id: str
    doc: Document
    agreed_spans: list[TagSpan]
    conflicts: list[Conflict]
    version: int = 0

    @property
    def resolved(self) -> bool:
        return all(c.resolution is not None for c in self.conflicts)


def _validate_tags(doc: Document, spans: list[TagSpan], label: str) -> list[TagSpan]:
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    for s in ordered:
        s.verify(doc.text)
    for a, b in zip(ordered, ordered[1:]):
        if a.overlaps(b):
            raise AnnotationError(f"{label} spans overlap: {a} / {b}")
    return ordered


def create_session(
    doc: Document,
    tags_a: list[TagSpan],
    tags_b: list[TagSpan],
    session_id: str | None = None,
) -> Session:
    """Diff two tag sets into agreed spans and overlap-clustered conflicts."""
    a = _validate_tags(doc, tags_a, "A")
    b = _validate_tags(doc, tags_b, "B")

    keys_a = {(s.start, s.end) for s in a}
    keys_b = {(s.start, s.end) for s in b}
    agreed_keys = keys_a & keys_b
    agreed = [s for s in a if (s.start, s.end) in agreed_keys]

    disputed = [("A", s) for s in a if (s.start, s.end) not in agreed_keys]
    disputed += [("B", s) for s in b if (s.start, s.end) not in agreed_keys]
    disputed.sort(key=lambda p: (p[1].start, p[1].end))

    # cluster by overlap: a new cluster starts when a span clears the
    # furthest end seen so far
    clusters: list[list[tuple[str, TagSpan]]] = []
    cluster_end = -1
    for side, span in disputed:
        if not clusters or span.start >= cluster_end:
            clusters.append([])
            cluster_end = span.end
        else:
            cluster_end = max(cluster_end, span.end)
        clusters[-1].append((side, span))

    conflicts = []
    for cid, members in enumerate(clusters, start=1):
        spans_a = tuple(s for side, s in members if side == "A")
        spans_b = tuple(s for side, s in members if side == "B")
        conflicts.append(Conflict(
            id=cid,
            doc_id=doc.id,
            region_start=min(s.start for _, s in members),
            region_end=max(s.end for _, s in members),
            option_a=spans_a,
            option_b=spans_b,
        ))

    return Session(
        id=session_id or uuid.uuid4().hex,
        doc=doc,
        agreed_spans=agreed,
        conflicts=conflicts,
    )


def resolve(
    session: Session,
    conflict_id: int,
    resolution: Resolution | str,
    annotator: str,
    version: int,
) -> Session:
    """Record one resolution; the caller must present the current version."""
    if version != session.version:
        raise StaleVersionError(
            f"version {version} is stale (current {session.version})"
        )
    resolution = Resolution(resolution)
    for i, conflict in enumerate(session.conflicts):
        if conflict.id == conflict_id:
            if conflict.resolution is not None:
                raise AnnotationError(f"conflict {conflict_id} already resolved")
            session.conflicts[i] = replace(
                conflict, resolution=resolution, resolved_by=annotator
            )
            session.version += 1
            return session
    raise AnnotationError(f"no such conflict: {conflict_id}")


def export_gold(session: Session) -> list[TagSpan]:
    """Agreed spans plus the chosen option of every resolved conflict.

    Refuses to export while conflicts are unresolved, or when a Both
    resolution produced overlapping spans (the conflict must be re-cut)."""
    unresolved = [c.id for c in session.conflicts if c.resolution is None]
    if unresolved:
        raise UnresolvedConflictsError(unresolved)
    out = list(session.agreed_spans)
    for c in session.conflicts:
        if c.resolution is Resolution.A:
            out.extend(c.option_a)
        elif c.resolution is Resolution.B:
            out.extend(c.option_b)
        elif c.resolution is Resolution.BOTH:
            seen = {(s.start, s.end) for s in c.option_a}
            out.extend(c.option_a)
            out.extend(s for s in c.option_b if (s.start, s.end) not in seen)
    out.sort(key=lambda s: (s.start, s.end))
    for a, b in zip(out, out[1:]):
        if a.overlaps(b):
            raise AnnotationError(
                f"overlap in export between ({a.start},{a.end}) and "
                f"({b.start},{b.end}); re-resolve the conflict"
            )
    return out


def flag_review_queue(
    doc: Document,
    current_spans: list[TagSpan],
    selections: list[SelectionRecord],
) -> Session:
    """Review session for spans the geolocator flagged as not literal.

    Each flagged span becomes a conflict whose option A keeps it and whose
    option B drops it; everything unflagged stays agreed.
    """
    flagged_keys = {
        (s.span.start, s.span.end)
        for s in selections
        if s.doc_id == doc.id and not s.literal
    }
    agreed = [s for s in current_spans if (s.start, s.end) not in flagged_keys]
    conflicts = []
    cid = 0
    for span in sorted(current_spans, key=lambda s: (s.start, s.end)):
        if (span.start, span.end) in flagged_keys:
            cid += 1
            conflicts.append(Conflict(
                id=cid,
                doc_id=doc.id,
                region_start=span.start,
                region_end=span.end,
                option_a=(span,),
                option_b=(),
            ))
    return Session(
        id=uuid.uuid4().hex,
        doc=doc,
        agreed_spans=sorted(agreed, key=lambda s: (s.start, s.end)),
        conflicts=conflicts,
    )


# ── persistence ──────────────────────────────────────────────────────────

def _span_to_obj(s: TagSpan) -> dict:
    obj = {"start": s.start, "end": s.end, "surface": s.surface}
    if s.literal is not None:
        obj["literal"] = s.literal
    return obj


def _span_from_obj(obj: dict) -> TagSpan:
    return TagSpan(
        start=obj["start"], end=obj["end"],
        surface=obj["surface"], literal=obj.get("literal"),
    )


def session_to_dict(session: Session) -> dict:
    return {
        "id": session.id,
        "doc": {
            "id": session.doc.id,
            "text": session.doc.text,
            "lang": session.doc.lang,
            "source": session.doc.source,
        },
        "agreed_spans": [_span_to_obj(s) for s in session.agreed_spans],
        "conflicts": [
            {
                "id": c.id,
                "doc_id": c.doc_id,
                "region_start": c.region_start,
                "region_end": c.region_end,
                "option_a": [_span_to_obj(s) for s in c.option_a],
                "option_b": [_span_to_obj(s) for s in c.option_b],
                "resolution": c.resolution.value if c.resolution else None,
                "resolved_by": c.resolved_by,
            }
            for c in session.conflicts
        ],
        "version": session.version,
    }


def session_from_dict(obj: dict) -> Session:
    doc = Document(
        id=obj["doc"]["id"],
        text=obj["doc"]["text"],
        lang=obj["doc"].get("lang", "en"),
        source=obj["doc"].get("source"),
    )
    conflicts = [
        Conflict(
            id=c["id"],
            doc_id=c["doc_id"],
            region_start=c["region_start"],
            region_end=c["region_end"],
            option_a=tuple(_span_from_obj(s) for s in c["option_a"]),
            option_b=tuple(_span_from_obj(s) for s in c["option_b"]),
            resolution=Resolution(c["resolution"]) if c["resolution"] else None,
            resolved_by=c.get("resolved_by"),
        )
        for c in obj["conflicts"]
    ]
    return Session(
        id=obj["id"],
        doc=doc,
        agreed_spans=[_span_from_obj(s) for s in obj["agreed_spans"]],
        conflicts=conflicts,
        version=obj["version"],
    )


class SessionStore:
    """One JSON file per session; writes go through an atomic rename."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        if not session_id.isalnum():
            raise AnnotationError(f"invalid session id {session_id!r}")
        return self.directory / f"{session_id}.json"

    def save(self, session: Session) -> None:
        path = self._path(session.id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(
            json.dumps(session_to_dict(session), ensure_ascii=False), encoding="utf-8"
        )
        os.replace(tmp, path)

    def load(self, session_id: str) -> Session:
        path = self._path(session_id)
        if not path.exists():
            raise AnnotationError(f"no such session: {session_id}")
        return session_from_dict(json.loads(path.read_text(encoding="utf-8")))

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.json"))

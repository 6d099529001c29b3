"""HTTP front of the reconciliation workflow.

JSON in, JSON out; session state lives in a SessionStore directory and is
re-persisted after every mutation, so a restarted service picks up exactly
where it stopped.  Stale-version writes are rejected with 409, as is export
while conflicts remain unresolved.
"""

from __future__ import annotations

import json
import threading
from collections import defaultdict

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from .annotation import (
    AnnotationError,
    SessionStore,
    StaleVersionError,
    UnresolvedConflictsError,
    create_session,
    export_gold,
    resolve,
    session_to_dict,
)
from .corpus import CorpusError, Document, TagSpan


class SpanBody(BaseModel):
    start: int
    end: int
    surface: str
    literal: bool | None = None

    def to_span(self) -> TagSpan:
        return TagSpan(start=self.start, end=self.end,
                       surface=self.surface, literal=self.literal)


class DocumentBody(BaseModel):
    id: str
    text: str
    lang: str = "en"
    source: str | None = None


class CreateSessionBody(BaseModel):
    doc: DocumentBody
    tags_a: list[SpanBody] = Field(default_factory=list)
    tags_b: list[SpanBody] = Field(default_factory=list)


class ResolutionBody(BaseModel):
    conflict_id: int
    resolution: str
    annotator: str
    version: int


def create_app(data_dir: str) -> FastAPI:
    app = FastAPI(title="annotation reconciliation service")
    store = SessionStore(data_dir)
    locks: dict[str, threading.Lock] = defaultdict(threading.Lock)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/sessions")
    def post_session(body: CreateSessionBody) -> dict:
        try:
            doc = Document(id=body.doc.id, text=body.doc.text,
                           lang=body.doc.lang, source=body.doc.source)
            session = create_session(
                doc,
                [s.to_span() for s in body.tags_a],
                [s.to_span() for s in body.tags_b],
            )
        except (AnnotationError, CorpusError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        store.save(session)
        return {"session_id": session.id}

    def _load(session_id: str):
        try:
            return store.load(session_id)
        except AnnotationError:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return session_to_dict(_load(session_id))

    @app.post("/sessions/{session_id}/resolutions")
    def post_resolution(session_id: str, body: ResolutionBody) -> dict:
        with locks[session_id]:
            session = _load(session_id)
            try:
                session = resolve(
                    session, body.conflict_id, body.resolution,
                    body.annotator, body.version,
                )
            except StaleVersionError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            except AnnotationError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            store.save(session)
        return session_to_dict(session)

    @app.get("/sessions/{session_id}/export")
    def get_export(session_id: str) -> PlainTextResponse:
        session = _load(session_id)
        try:
            spans = export_gold(session)
        except UnresolvedConflictsError as exc:
            raise HTTPException(
                status_code=409,
                detail={"unresolved_conflicts": exc.conflict_ids},
            )
        except AnnotationError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        lines = [
            json.dumps(
                {"doc_id": session.doc.id, "start": s.start,
                 "end": s.end, "surface": s.surface},
                ensure_ascii=False,
            )
            for s in spans
        ]
        payload = "\n".join(lines) + ("\n" if lines else "")
        return PlainTextResponse(
            payload,
            media_type="application/x-ndjson",
            headers={
                "Content-Disposition":
                    f'attachment; filename="{session.doc.id}.spans.jsonl"'
            },
        )

    return app

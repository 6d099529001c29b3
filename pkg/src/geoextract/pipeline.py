"""End-to-end stages wiring the modules together.

Each stage consumes and produces plain files (documents, spans, selections),
so stages compose on disk with no hidden state.  Documents are processed in
parallel when asked, and outputs are always emitted in document order so
reruns are byte-comparable.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .agent import AgentSession, Budgets, context_window, run_session, summarize_selections
from .alignment import align, merge_across_chunks
from .chunking import DEFAULT_WINDOWS, plan_chunks
from .corpus import Document, SelectionRecord, TagSpan
from .extraction import (
    ExtractionKind,
    TagFormatError,
    parse_json_tags,
    parse_markdown_tags,
    to_document_offsets,
)
from .gateway import Gateway, GatewayError, build_ner_prompt
from .gazetteer import GazetteerIndex
from .prompts import OutputFormat

log = logging.getLogger(__name__)


@dataclass
class RunReport:
    documents: int = 0
    chunks: int = 0
    tags: int = 0
    failures: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "documents": self.documents,
            "chunks": self.chunks,
            "tags": self.tags,
            "failures": self.failures,
        }


def extract_document(
    doc: Document,
    output_format: OutputFormat,
    gateway: Gateway,
    min_len: int,
    max_len: int,
    report: RunReport,
) -> list[TagSpan]:
    """Chunk, tag, parse, align and merge one document."""
    plan = plan_chunks(doc, min_len, max_len)
    per_chunk: list[list[TagSpan]] = []
    for chunk in plan.chunks:
        try:
            exchange = gateway.complete(build_ner_prompt(chunk.text, output_format))
        except GatewayError as exc:
            report.failures.append(
                {"doc_id": doc.id, "chunk_start": chunk.start, "error": str(exc)}
            )
            continue
        if output_format is OutputFormat.JSON_LIST:
            try:
                names = parse_json_tags(exchange.response_text)
            except TagFormatError as exc:
                report.failures.append(
                    {"doc_id": doc.id, "chunk_start": chunk.start,
                     "error": f"unparseable output: {exc}"}
                )
                continue
            spans = align(chunk.text, names).spans
        else:
            result = parse_markdown_tags(chunk.text, exchange.response_text)
            if result.kind is ExtractionKind.POSITIONED_SPANS:
                spans = list(result.spans)
            else:
                spans = align(chunk.text, list(result.names)).spans
        per_chunk.append(to_document_offsets(chunk, spans, doc.text))
    report.chunks += len(plan.chunks)
    merged = merge_across_chunks(doc, per_chunk)
    report.tags += len(merged)
    return merged


def extract_corpus(
    docs: list[Document],
    output_format: OutputFormat | str,
    gateway: Gateway,
    min_len: int | None = None,
    max_len: int | None = None,
    jobs: int = 1,
) -> tuple[dict[str, list[TagSpan]], RunReport]:
    output_format = OutputFormat(output_format)
    window = DEFAULT_WINDOWS[output_format.value]
    min_len = window[0] if min_len is None else min_len
    max_len = window[1] if max_len is None else max_len

    # one sub-report per document, merged in document order, so parallel
    # runs report identically to serial ones
    def one(doc: Document) -> tuple[list[TagSpan], RunReport]:
        sub = RunReport()
        spans = extract_document(doc, output_format, gateway, min_len, max_len, sub)
        return spans, sub

    if jobs <= 1:
        outcomes = [one(doc) for doc in docs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(one, docs))

    report = RunReport(documents=len(docs))
    results: dict[str, list[TagSpan]] = {}
    for doc, (spans, sub) in zip(docs, outcomes):
        results[doc.id] = spans
        report.chunks += sub.chunks
        report.tags += sub.tags
        report.failures.extend(sub.failures)
    return {doc_id: results[doc_id] for doc_id in sorted(results)}, report


@dataclass
class GeocodeRun:
    selections: list[SelectionRecord]
    sessions: list[tuple[str, TagSpan, AgentSession]]
    report: RunReport


def geocode_corpus(
    docs: list[Document],
    spans_by_doc: dict[str, list[TagSpan]],
    gateway: Gateway,
    index: GazetteerIndex,
    budgets: Budgets | None = None,
    jobs: int = 1,
) -> GeocodeRun:
    """Run one agent session per extracted tag."""
    budgets = budgets or Budgets()
    docs_by_id = {d.id: d for d in docs}
    work: list[tuple[Document, TagSpan]] = []
    for doc_id in sorted(spans_by_doc):
        doc = docs_by_id.get(doc_id)
        if doc is None:
            raise ValueError(f"spans reference unknown document {doc_id!r}")
        for span in spans_by_doc[doc_id]:
            work.append((doc, span))

    def one(item: tuple[Document, TagSpan]) -> AgentSession:
        doc, span = item
        ctx = context_window(doc, span, budgets.context_margin)
        return run_session(span.surface, ctx, gateway, index, budgets)

    if jobs <= 1:
        sessions = [one(item) for item in work]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            sessions = list(pool.map(one, work))

    report = RunReport(documents=len(spans_by_doc), tags=len(work))
    selections: list[SelectionRecord] = []
    kept: list[tuple[str, TagSpan, AgentSession]] = []
    for (doc, span), session in zip(work, sessions):
        kept.append((doc.id, span, session))
        if session.failed:
            report.failures.append({
                "doc_id": doc.id,
                "span": [span.start, span.end],
                "error": session.finish_reason or "session failed",
            })
            continue
        selections.extend(summarize_selections(doc.id, span, session))
    return GeocodeRun(selections=selections, sessions=kept, report=report)

"""Tool-loop geocoding agent.

One session resolves one extracted tag.  The model alternates free-form
reasoning with tool calls — search the gazetteer, select an entry (or the
-1 unresolvable sentinel), finish with a reason — under two hard budgets: a
total action budget and a per-place search cap.  Every thought, call and
tool result lands in the session transcript, so a run against a scripted
transport is bitwise reproducible and auditable after the fact.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .corpus import Document, SelectionRecord, TagSpan, byte_slice
from .gateway import ChatExchange, Gateway, GatewayError, ToolCall
from .gazetteer import GazetteerIndex
from .prompts import agent_system_prompt

log = logging.getLogger(__name__)

UNRESOLVABLE_ID = -1

TOOL_SCHEMAS = [
    {
        "type": "function",
        "function": {
            "name": "search_tool",
            "description": "Search GeoNames for candidate entries matching a "
                           "text, optionally filtered by ISO country code.",
            "parameters": {
                "type": "object",
                "properties": {
                    "query": {"type": "string"},
                    "country_code": {"type": "string"},
                },
                "required": ["query"],
            },
        },
    },
    {
        "type": "function",
        "function": {
            "name": "select_tool",
            "description": "Select the geoname id for one place in the tag. "
                           "Use geonameid=-1 when no entry fits.",
            "parameters": {
                "type": "object",
                "properties": {
                    "place": {"type": "string"},
                    "geonameid": {"type": "integer"},
                    "context": {"type": "string"},
                    "literal_toponym": {"type": "boolean"},
                },
                "required": ["place", "geonameid", "context", "literal_toponym"],
            },
        },
    },
    {
        "type": "function",
        "function": {
            "name": "finish_tool",
            "description": "End the episode, explaining why the task is done.",
            "parameters": {
                "type": "object",
                "properties": {"reason": {"type": "string"}},
                "required": ["reason"],
            },
        },
    },
]


@dataclass
class Budgets:
    action_budget: int = 15
    searches_per_place: int = 2
    candidate_limit: int = 8
    context_margin: int = 400  # chars kept either side of the tag's sentence


@dataclass(frozen=True)
class Selection:
    place: str
    geonameid: int
    context_note: str
    literal: bool


@dataclass
class AgentSession:
    tag_surface: str
    context_window: str
    actions_used: int = 0
    searches_by_place: dict[str, int] = field(default_factory=dict)
    selections: list[Selection] = field(default_factory=list)
    finished: bool = False
    finish_reason: str | None = None
    failed: bool = False
    transcript: list[dict] = field(default_factory=list)

    def note(self, kind: str, content) -> None:
        self.transcript.append({"kind": kind, "content": content})

    @property
    def tool_call_count(self) -> int:
        return sum(1 for t in self.transcript if t["kind"] == "tool_call")


def context_window(doc: Document, span: TagSpan, margin: int = 400) -> str:
    """The sentence containing the span plus up to *margin* chars each side."""
    text = doc.text
    surface_start = len(byte_slice(text, 0, span.start))
    surface_end = surface_start + len(span.surface)

    sent_start = 0
    for mark in (". ", "\n", "! ", "? "):
        p = text.rfind(mark, 0, surface_start)
        if p != -1:
            sent_start = max(sent_start, p + len(mark))
    sent_end = len(text)
    for mark in (". ", "\n", "! ", "? "):
        p = text.find(mark, surface_end)
        if p != -1:
            sent_end = min(sent_end, p + 1)
    lo = max(0, sent_start - margin)
    hi = min(len(text), sent_end + margin)
    return text[lo:hi]


def _tool_result(session: AgentSession, payload: dict) -> str:
    result = json.dumps(payload, ensure_ascii=False)
    session.note("tool_result", payload)
    return result


def handle_action(
    session: AgentSession,
    action: ToolCall,
    index: GazetteerIndex,
    budgets: Budgets,
) -> str:
    """Execute one validated tool call and return the tool-result text.

    Invalid calls (over-cap searches, duplicate or unknown selections) cost
    an action and feed an error result back to the model rather than
    aborting the episode.
    """
    if session.finished:
        raise RuntimeError("session already finished")
    session.actions_used += 1
    session.note("tool_call", {"name": action.name, "arguments": action.arguments})
    args = action.arguments

    if action.name == "search_tool":
        query = str(args.get("query", "")).strip()
        if not query:
            return _tool_result(session, {"error": "empty query"})
        used = session.searches_by_place.get(query, 0)
        if used >= budgets.searches_per_place:
            return _tool_result(
                session, {"error": f"search budget exceeded for place {query!r}"}
            )
        session.searches_by_place[query] = used + 1
        country = args.get("country_code") or None
        candidates = index.search(query, country_code=country,
                                  limit=budgets.candidate_limit)
        return _tool_result(
            session, {"candidates": [c.summary() for c in candidates]}
        )

    if action.name == "select_tool":
        place = str(args.get("place", "")).strip()
        try:
            geonameid = int(args.get("geonameid"))
        except (TypeError, ValueError):
            return _tool_result(session, {"error": "geonameid must be an integer"})
        if geonameid != UNRESOLVABLE_ID and index.get(geonameid) is None:
            return _tool_result(session, {"error": f"unknown geonameid {geonameid}"})
        if any(s.place == place and s.geonameid == geonameid
               for s in session.selections):
            return _tool_result(
                session,
                {"error": f"duplicate selection ({place!r}, {geonameid})"},
            )
        session.selections.append(Selection(
            place=place,
            geonameid=geonameid,
            context_note=str(args.get("context", "")),
            literal=bool(args.get("literal_toponym", True)),
        ))
        return _tool_result(session, {"ok": f"selected {geonameid} for {place!r}"})

    if action.name == "finish_tool":
        session.finished = True
        session.finish_reason = str(args.get("reason", ""))
        return _tool_result(session, {"ok": "finished"})

    return _tool_result(session, {"error": f"unknown tool {action.name!r}"})


def _force_finish(session: AgentSession, reason: str) -> None:
    if not session.finished:
        session.finished = True
        session.finish_reason = reason
        session.note("forced_finish", reason)


def run_session(
    tag_surface: str,
    document_context: str,
    gateway: Gateway,
    index: GazetteerIndex,
    budgets: Budgets | None = None,
) -> AgentSession:
    """Drive one chat episode for *tag_surface* until finish or budget."""
    if not tag_surface:
        raise ValueError("tag surface must be non-empty")
    budgets = budgets or Budgets()
    session = AgentSession(tag_surface=tag_surface, context_window=document_context)

    messages: list[dict] = [
        {"role": "system", "content": agent_system_prompt(budgets.action_budget)},
        {
            "role": "user",
            "content": f"PLACE: {tag_surface}\n\nCONTEXT:\n{document_context}",
        },
    ]

    while not session.finished:
        try:
            exchange: ChatExchange = gateway.complete(messages, tools=TOOL_SCHEMAS)
        except GatewayError as exc:
            log.warning("transport failure for tag %r: %s", tag_surface, exc)
            session.failed = True
            _force_finish(session, f"transport error: {exc}")
            break

        if exchange.response_text:
            session.note("thought", exchange.response_text)
        if not exchange.tool_calls:
            # a model that stops calling tools ends the episode
            _force_finish(session, "model stopped issuing tool calls")
            break

        assistant_msg: dict = {
            "role": "assistant",
            "content": exchange.response_text or None,
            "tool_calls": [
                {
                    "id": f"call_{session.actions_used + k}",
                    "type": "function",
                    "function": {
                        "name": c.name,
                        "arguments": json.dumps(c.arguments, ensure_ascii=False),
                    },
                }
                for k, c in enumerate(exchange.tool_calls)
            ],
        }
        messages.append(assistant_msg)

        for k, call in enumerate(exchange.tool_calls):
            result = handle_action(session, call, index, budgets)
            messages.append({
                "role": "tool",
                "tool_call_id": assistant_msg["tool_calls"][k]["id"],
                "content": result,
            })
            if session.finished:
                break
            if session.actions_used >= budgets.action_budget:
                _force_finish(session, "budget exhausted")
                break

    return session


def summarize_selections(
    doc_id: str,
    span: TagSpan,
    session: AgentSession,
) -> list[SelectionRecord]:
    """selections.jsonl records for one completed session (none if failed)."""
    if session.failed:
        return []
    return [
        SelectionRecord(
            doc_id=doc_id,
            span=span,
            place=s.place,
            geonameid=s.geonameid,
            literal=s.literal,
            context=s.context_note,
        )
        for s in session.selections
    ]

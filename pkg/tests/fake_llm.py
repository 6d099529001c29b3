"""Deterministic stand-in models for offline tests.

Each fake implements the transport protocol and derives its reply purely
from the request messages, so recording a run and replaying the transcript
through a ScriptedTransport reproduces it bit for bit.
"""

from __future__ import annotations

import json

from geoextract.gateway import ChatExchange, ModelConfig, ToolCall


def _tagged(text: str, locations: list[str]) -> str:
    out = text
    for loc in sorted(locations, key=len, reverse=True):
        if loc in out and f"@@{loc}##" not in out:
            out = out.replace(loc, f"@@{loc}##")
    return out


class FakeNerModel:
    """Tags every known location it sees in the chunk."""

    def __init__(self, locations: list[str]):
        self.locations = locations

    def send(self, messages, config: ModelConfig, tools=None) -> ChatExchange:
        chunk = messages[-1]["content"]
        system = messages[0]["content"]
        found = []
        pos = 0
        while pos < len(chunk):
            hit = None
            for loc in sorted(self.locations, key=len, reverse=True):
                if chunk.startswith(loc, pos):
                    hit = loc
                    break
            if hit:
                found.append(hit)
                pos += len(hit)
            else:
                pos += 1
        if "@@" in system:
            text = _tagged(chunk, self.locations)
        else:
            text = json.dumps(found)
        return ChatExchange(
            request_messages=tuple(messages),
            response_text=text,
            model_id="fake-ner",
        )


def _place_from_messages(messages) -> str:
    for msg in messages:
        if msg["role"] == "user" and msg["content"].startswith("PLACE:"):
            return msg["content"].split("\n", 1)[0][len("PLACE:"):].strip()
    return ""


def _tool_results(messages) -> list[dict]:
    return [json.loads(m["content"]) for m in messages if m["role"] == "tool"]


def _agent_reply(messages, calls: list[ToolCall], thought: str = "") -> ChatExchange:
    return ChatExchange(
        request_messages=tuple(messages),
        response_text=thought,
        tool_calls=tuple(calls),
        model_id="fake-agent",
    )


class FakeAgentModel:
    """search -> select the top candidate (or -1) -> finish."""

    def __init__(self, literal: bool = True):
        self.literal = literal

    def send(self, messages, config: ModelConfig, tools=None) -> ChatExchange:
        place = _place_from_messages(messages)
        results = _tool_results(messages)
        if not results:
            return _agent_reply(
                messages,
                [ToolCall("search_tool", {"query": place})],
                thought=f"Searching for {place}.",
            )
        if len(results) == 1:
            candidates = results[0].get("candidates", [])
            gid = candidates[0]["geonameid"] if candidates else -1
            note = ("top gazetteer candidate for the tag" if candidates
                    else "no candidate found")
            return _agent_reply(messages, [ToolCall("select_tool", {
                "place": place,
                "geonameid": gid,
                "context": note,
                "literal_toponym": self.literal,
            })])
        return _agent_reply(
            messages, [ToolCall("finish_tool", {"reason": "all places resolved"})]
        )


class EndlessSearcher:
    """Issues a fresh search every turn and never finishes."""

    def send(self, messages, config: ModelConfig, tools=None) -> ChatExchange:
        n = len(_tool_results(messages))
        return _agent_reply(
            messages, [ToolCall("search_tool", {"query": f"place-{n}"})]
        )


class RepeatSearcher:
    """Searches the same place forever (trips the per-place cap)."""

    def __init__(self, place: str = "Goma"):
        self.place = place

    def send(self, messages, config: ModelConfig, tools=None) -> ChatExchange:
        return _agent_reply(
            messages, [ToolCall("search_tool", {"query": self.place})]
        )


class ScriptPlayer:
    """Plays back a fixed list of tool calls, one per turn."""

    def __init__(self, calls: list[ToolCall]):
        self.calls = calls

    def send(self, messages, config: ModelConfig, tools=None) -> ChatExchange:
        n = len(_tool_results(messages))
        if n < len(self.calls):
            return _agent_reply(messages, [self.calls[n]])
        return _agent_reply(
            messages, [ToolCall("finish_tool", {"reason": "script exhausted"})]
        )

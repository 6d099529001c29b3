"""Chat-completions gateway with deterministic replay.

Talks to any endpoint speaking the common OpenAI-style chat-completions
shape.  Three transports:

  * HttpTransport      — live requests with bounded retry/backoff
  * ScriptedTransport  — replays a recorded transcript, keyed by a
                         fingerprint of the canonicalized request messages
  * RecordingTransport — wraps another transport and captures exchanges

Temperature is pinned to 0 everywhere: reruns against the same endpoint are
as deterministic as the provider allows, and reruns against a scripted
transport are bitwise reproducible.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

import requests

from .prompts import (
    FEWSHOT_EXAMPLES,
    JSON_FORMAT_INSTRUCTION,
    MARKDOWN_FORMAT_INSTRUCTION,
    NER_SYSTEM_PROMPT,
    OutputFormat,
)

API_KEY_ENV = "GEOEXTRACT_API_KEY"

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class GatewayError(RuntimeError):
    """Transport-level failure (non-retryable status or retries exhausted)."""


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict

    def to_dict(self) -> dict:
        return {"name": self.name, "arguments": self.arguments}


@dataclass(frozen=True)
class ChatExchange:
    request_messages: tuple[dict, ...]
    response_text: str
    tool_calls: tuple[ToolCall, ...] = ()
    latency_ms: int = 0
    model_id: str = ""

    def to_dict(self) -> dict:
        return {
            "request_messages": list(self.request_messages),
            "response_text": self.response_text,
            "tool_calls": [c.to_dict() for c in self.tool_calls],
            "latency_ms": self.latency_ms,
            "model_id": self.model_id,
        }

    @staticmethod
    def from_dict(obj: dict) -> "ChatExchange":
        return ChatExchange(
            request_messages=tuple(obj["request_messages"]),
            response_text=obj["response_text"],
            tool_calls=tuple(
                ToolCall(c["name"], c["arguments"]) for c in obj.get("tool_calls", [])
            ),
            latency_ms=int(obj.get("latency_ms", 0)),
            model_id=obj.get("model_id", ""),
        )


@dataclass
class ModelConfig:
    endpoint_url: str = ""
    model_id: str = ""
    max_retries: int = 3
    max_in_flight: int = 4
    timeout_s: float = 60.0
    backoff_base_s: float = 0.5

    @staticmethod
    def from_env(**overrides) -> "ModelConfig":
        cfg = ModelConfig(
            endpoint_url=os.getenv("GEOEXTRACT_ENDPOINT", ""),
            model_id=os.getenv("GEOEXTRACT_MODEL", ""),
        )
        for key, value in overrides.items():
            if value is not None:
                setattr(cfg, key, value)
        return cfg


def fingerprint(messages: Iterable[dict]) -> str:
    """Stable hash of canonicalized request messages."""
    canonical = json.dumps(list(messages), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ── prompt assembly ──────────────────────────────────────────────────────

def build_ner_prompt(
    chunk_text: str,
    output_format: OutputFormat,
    fewshot: tuple[str, str] | None = None,
) -> list[dict]:
    """Messages for one NER tagging request over *chunk_text*.

    System message = tagging rules + format instruction; one few-shot
    example pair; the chunk goes in verbatim as the final user message.
    """
    if not chunk_text:
        raise ValueError("chunk_text must be non-empty")
    output_format = OutputFormat(output_format)
    instruction = (
        JSON_FORMAT_INSTRUCTION
        if output_format is OutputFormat.JSON_LIST
        else MARKDOWN_FORMAT_INSTRUCTION
    )
    example_in, example_out = fewshot or FEWSHOT_EXAMPLES[output_format]
    return [
        {"role": "system", "content": NER_SYSTEM_PROMPT + "\n" + instruction},
        {"role": "user", "content": example_in},
        {"role": "assistant", "content": example_out},
        {"role": "user", "content": chunk_text},
    ]


# ── transports ───────────────────────────────────────────────────────────

class Transport(Protocol):
    def send(self, messages: list[dict], config: ModelConfig,
             tools: list[dict] | None) -> ChatExchange: ...


class HttpTransport:
    """Live chat-completions calls with exponential backoff on transient
    failures (connection errors, 429 and 5xx)."""

    def __init__(self, session: requests.Session | None = None,
                 sleep=time.sleep) -> None:
        self._session = session or requests.Session()
        self._sleep = sleep

    def send(self, messages: list[dict], config: ModelConfig,
             tools: list[dict] | None = None) -> ChatExchange:
        if not config.endpoint_url:
            raise GatewayError("no endpoint URL configured")
        api_key = os.getenv(API_KEY_ENV, "")
        if not api_key:
            raise GatewayError(f"credential missing: set {API_KEY_ENV}")
        payload: dict = {
            "model": config.model_id,
            "messages": messages,
            "temperature": 0,
        }
        if tools:
            payload["tools"] = tools
        headers = {"Authorization": f"Bearer {api_key}"}

        last_error: str = ""
        for attempt in range(config.max_retries + 1):
            if attempt:
                self._sleep(config.backoff_base_s * (2 ** (attempt - 1)))
            started = time.monotonic()
            try:
                resp = self._session.post(
                    config.endpoint_url, json=payload, headers=headers,
                    timeout=config.timeout_s,
                )
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
                continue
            latency_ms = int((time.monotonic() - started) * 1000)
            if resp.status_code in _RETRYABLE_STATUS:
                last_error = f"status {resp.status_code}: {resp.text[:500]}"
                continue
            if resp.status_code != 200:
                raise GatewayError(
                    f"status {resp.status_code}: {resp.text[:2000]}"
                )
            return _parse_response(resp.json(), messages, latency_ms, config)
        raise GatewayError(
            f"retries exhausted after {config.max_retries + 1} attempts; "
            f"last error: {last_error}"
        )


def _parse_response(body: dict, messages: list[dict], latency_ms: int,
                    config: ModelConfig) -> ChatExchange:
    try:
        message = body["choices"][0]["message"]
    except (KeyError, IndexError) as exc:
        raise GatewayError(f"malformed response body: {body!r:.500}") from exc
    calls = []
    for tc in message.get("tool_calls") or []:
        fn = tc.get("function", {})
        raw_args = fn.get("arguments", "{}")
        args = json.loads(raw_args) if isinstance(raw_args, str) else raw_args
        calls.append(ToolCall(name=fn.get("name", ""), arguments=args))
    return ChatExchange(
        request_messages=tuple(messages),
        response_text=message.get("content") or "",
        tool_calls=tuple(calls),
        latency_ms=latency_ms,
        model_id=body.get("model", config.model_id),
    )


class ScriptedTransport:
    """Replays recorded exchanges keyed by the request fingerprint.

    strict=True raises on requests that were never recorded, which is what
    tests want; strict=False returns an empty assistant message instead.
    """

    def __init__(self, exchanges: Iterable[ChatExchange], strict: bool = True) -> None:
        self._by_fingerprint: dict[str, ChatExchange] = {}
        for ex in exchanges:
            self._by_fingerprint[fingerprint(ex.request_messages)] = ex
        self.strict = strict

    def send(self, messages: list[dict], config: ModelConfig,
             tools: list[dict] | None = None) -> ChatExchange:
        key = fingerprint(messages)
        found = self._by_fingerprint.get(key)
        if found is None:
            if self.strict:
                raise GatewayError(f"unscripted request (fingerprint {key[:12]})")
            return ChatExchange(request_messages=tuple(messages), response_text="")
        return found


class RecordingTransport:
    """Wraps a transport and captures every exchange for later replay."""

    def __init__(self, inner: Transport) -> None:
        self._inner = inner
        self._lock = threading.Lock()
        self.exchanges: list[ChatExchange] = []

    def send(self, messages: list[dict], config: ModelConfig,
             tools: list[dict] | None = None) -> ChatExchange:
        exchange = self._inner.send(messages, config, tools)
        with self._lock:
            self.exchanges.append(exchange)
        return exchange


# ── gateway ──────────────────────────────────────────────────────────────

class Gateway:
    """Bounds in-flight concurrency and dispatches to the configured
    transport."""

    def __init__(self, config: ModelConfig, transport: Transport | None = None) -> None:
        self.config = config
        self.transport = transport or HttpTransport()
        self._slots = threading.Semaphore(max(1, config.max_in_flight))

    def complete(self, messages: list[dict],
                 tools: list[dict] | None = None) -> ChatExchange:
        with self._slots:
            return self.transport.send(messages, self.config, tools)


# ── transcript persistence ───────────────────────────────────────────────

def record_transcript(exchanges: Iterable[ChatExchange], path: str | Path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for ex in exchanges:
            fh.write(json.dumps(ex.to_dict(), ensure_ascii=False) + "\n")
            count += 1
    return count


def load_transcript(path: str | Path) -> list[ChatExchange]:
    out: list[ChatExchange] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(ChatExchange.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise GatewayError(f"{path}:{lineno}: malformed transcript line") from exc
    return out

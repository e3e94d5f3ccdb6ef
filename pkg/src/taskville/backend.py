"""Text-completion backends: a remote chat-completion client and deterministic test doubles."""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import httpx

CONVERSATION_TAGS = ("conversation", "tdp")


class BackendError(RuntimeError):
    """Raised when a backend cannot produce a reply after retries."""

    def __init__(self, message: str, tag: str = ""):
        super().__init__(message)
        self.tag = tag


class StructuredParseError(ValueError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]
    tag: str
    temperature: float = 0.0
    frequency_penalty: float = 0.0
    presence_penalty: float = 0.0
    max_tokens: int = 512

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        # Conversation-facing and target-planning calls are pinned to fully
        # deterministic sampling parameters.
        if self.tag in CONVERSATION_TAGS and (
            self.temperature != 0 or self.frequency_penalty != 0 or self.presence_penalty != 0
        ):
            raise ValueError(f"{self.tag} requests must use temperature 0 and zero penalties")

    @property
    def user_text(self) -> str:
        for role, content in reversed(self.messages):
            if role == "user":
                return content
        return self.messages[-1][1]


def request(messages: Sequence[tuple[str, str]], tag: str, **kwargs) -> ChatRequest:
    return ChatRequest(messages=tuple((r, c) for r, c in messages), tag=tag, **kwargs)


@dataclass
class BackendConfig:
    kind: str  # "remote" | "scripted"
    endpoint: str = ""
    model_name: str = ""
    auth_env_var: str = "TASKVILLE_API_KEY"
    timeout_ms: int = 30_000
    max_retries: int = 3
    seed: int = 0

    def describe(self) -> dict:
        # Secrets stay in the environment; only the variable name is recorded.
        return {
            "kind": self.kind,
            "endpoint": self.endpoint,
            "model_name": self.model_name,
            "auth_env_var": self.auth_env_var,
            "timeout_ms": self.timeout_ms,
            "max_retries": self.max_retries,
            "seed": self.seed,
        }


class CaptureLog:
    """Append-only record of every backend call, for audits and prompt tests."""

    def __init__(self) -> None:
        self.records: list[dict] = []

    def append(self, *, agent: str, request_: ChatRequest, reply: str, attempts: int, backend: str) -> None:
        self.records.append(
            {
                "index": len(self.records),
                "agent": agent,
                "stage": request_.tag,
                "messages": [{"role": r, "content": c} for r, c in request_.messages],
                "reply": reply,
                "temperature": request_.temperature,
                "frequency_penalty": request_.frequency_penalty,
                "presence_penalty": request_.presence_penalty,
                "max_tokens": request_.max_tokens,
                "attempts": attempts,
                "backend": backend,
            }
        )

    def by_stage(self, stage: str) -> list[dict]:
        return [r for r in self.records if r["stage"] == stage]

    def prompts(self, stage: Optional[str] = None) -> list[str]:
        records = self.records if stage is None else self.by_stage(stage)
        return ["\n".join(m["content"] for m in r["messages"]) for r in records]

    def to_jsonl(self) -> str:
        lines = [json.dumps(r, sort_keys=True) for r in self.records]
        return "\n".join(lines) + ("\n" if lines else "")

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")


class Backend:
    """Interface: complete(request, agent) -> reply text."""

    name = "backend"

    def __init__(self, capture: Optional[CaptureLog] = None):
        self.capture = capture

    def complete(self, request_: ChatRequest, agent: str = "") -> str:
        reply, attempts = self._complete(request_)
        if self.capture is not None:
            self.capture.append(agent=agent, request_=request_, reply=reply, attempts=attempts, backend=self.name)
        return reply

    def _complete(self, request_: ChatRequest) -> tuple[str, int]:
        raise NotImplementedError


def _digest(request_: ChatRequest, seed: int) -> str:
    payload = json.dumps([request_.tag, list(request_.messages), seed], sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


class ScriptedBackend(Backend):
    """Replay-queue backend; when the queue is empty it falls back to a
    deterministic digest of (tag, messages, seed)."""

    name = "scripted"

    def __init__(self, replies: Optional[Sequence[str]] = None, seed: int = 0, capture: Optional[CaptureLog] = None):
        super().__init__(capture)
        self.queue: list[str] = list(replies or [])
        self.seed = seed

    def push(self, *replies: str) -> None:
        self.queue.extend(replies)

    def _complete(self, request_: ChatRequest) -> tuple[str, int]:
        if self.queue:
            return self.queue.pop(0), 1
        return f"[{request_.tag}:{_digest(request_, self.seed)}:{self.seed}]", 1


class SilentBackend(Backend):
    """Always replies with an empty string; exercises every fallback path."""

    name = "silent"

    def _complete(self, request_: ChatRequest) -> tuple[str, int]:
        return "", 1


class FailingBackend(Backend):
    """Always raises; for testing caller fallbacks on hard backend outages."""

    name = "failing"

    def _complete(self, request_: ChatRequest) -> tuple[str, int]:
        raise BackendError("scripted failure", tag=request_.tag)


class RemoteBackend(Backend):
    """Chat-completion HTTP client with bounded retries and exponential backoff."""

    name = "remote"
    backoff_seconds = (1.0, 2.0, 4.0)

    def __init__(
        self,
        config: BackendConfig,
        capture: Optional[CaptureLog] = None,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        super().__init__(capture)
        self.config = config
        self._sleep = sleep
        self._client = httpx.Client(
            transport=transport,
            timeout=config.timeout_ms / 1000.0,
        )

    def close(self) -> None:
        self._client.close()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.auth_env_var, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _complete(self, request_: ChatRequest) -> tuple[str, int]:
        body = {
            "model": self.config.model_name,
            "messages": [{"role": r, "content": c} for r, c in request_.messages],
            "temperature": request_.temperature,
            "frequency_penalty": request_.frequency_penalty,
            "presence_penalty": request_.presence_penalty,
            "max_tokens": request_.max_tokens,
        }
        last_error: Exception | None = None
        attempts = max(1, self.config.max_retries)
        for attempt in range(1, attempts + 1):
            try:
                response = self._client.post(self.config.endpoint, json=body, headers=self._headers())
                if response.status_code >= 500 or response.status_code == 429:
                    raise BackendError(f"HTTP {response.status_code}", tag=request_.tag)
                response.raise_for_status()
                payload = response.json()
                return str(payload["choices"][0]["message"]["content"]), attempt
            except (httpx.HTTPError, BackendError, KeyError, IndexError, ValueError) as err:
                last_error = err
                if attempt < attempts:
                    self._sleep(self.backoff_seconds[min(attempt - 1, len(self.backoff_seconds) - 1)])
        raise BackendError(f"backend failed after {attempts} attempts: {last_error}", tag=request_.tag)


def parse_structured(reply_text: str, schema: Sequence[str]) -> dict:
    """Extract the first well-formed JSON object in the reply matching the schema.

    Raises StructuredParseError when no such object exists, so callers can
    switch to plain-text handling.
    """
    if not schema:
        raise ValueError("schema must be non-empty")
    decoder = json.JSONDecoder()
    index = reply_text.find("{")
    while index != -1:
        try:
            obj, _ = decoder.raw_decode(reply_text[index:])
        except json.JSONDecodeError:
            index = reply_text.find("{", index + 1)
            continue
        if isinstance(obj, dict) and all(key in obj for key in schema):
            return {key: obj[key] for key in schema}
        index = reply_text.find("{", index + 1)
    raise StructuredParseError(f"no object with fields {list(schema)} in reply")

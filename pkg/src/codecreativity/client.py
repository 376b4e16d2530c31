"""Chat-model clients: persistent sessions, a scripted stub, and an HTTP
adapter for chat-completion providers.

Every exchange can be appended to a JSONL audit log so that scoring replays
transcripts instead of re-querying models.  Credentials are read from the
environment at request time and never serialized anywhere.
"""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

log = logging.getLogger(__name__)


class ModelError(Exception):
    """A model call failed permanently (after retries, if applicable)."""


class ScriptExhausted(ModelError):
    """A scripted stub ran out of replies."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class ProviderConfig:
    """How to reach one provider/model, plus decoding parameters."""

    provider: str = "stub"
    model: str = "stub"
    endpoint: str = "https://api.openai.com/v1"
    credential_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 2048
    requests_per_minute: float = 60.0
    max_attempts: int = 3
    backoff_seconds: float = 1.0


class AuditLog:
    """Append-only JSONL transcript: one line per message, in wire order."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, session_id: str, turn: int, role: str, content: str,
               params: dict) -> None:
        row = {
            "content": content,
            "params": params,
            "role": role,
            "session_id": session_id,
            "timestamp": time.time(),
            "turn": turn,
        }
        line = json.dumps(row, sort_keys=True, ensure_ascii=False)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")


class Session:
    """One conversation thread: a system preamble, then alternating turns.

    History is append-only; callers get copies, never the live list.
    """

    def __init__(self, client: "ChatClient", system_prompt: str, session_id: str):
        self._client = client
        self._history: list[ChatMessage] = [ChatMessage("system", system_prompt)]
        self.session_id = session_id

    @property
    def history(self) -> tuple[ChatMessage, ...]:
        return tuple(self._history)

    def send(self, message: str) -> str:
        self._history.append(ChatMessage("user", message))
        reply = self._client.complete(self.history, self.session_id)
        self._history.append(ChatMessage("assistant", reply))
        return reply


class ChatClient:
    """Base class: session bookkeeping, auditing, and the completion hook."""

    def __init__(self, *, audit_log: AuditLog | None = None, model_id: str = "model"):
        self.audit_log = audit_log
        self.model_id = model_id
        self._session_counter = 0
        self._lock = threading.Lock()

    def _next_session_id(self) -> str:
        with self._lock:
            self._session_counter += 1
            return f"{self.model_id}-s{self._session_counter}"

    def open_session(self, system_prompt: str) -> Session:
        return Session(self, system_prompt, self._next_session_id())

    def one_shot(self, system_prompt: str, message: str) -> str:
        """A single exchange in a fresh session; no state is retained."""
        return self.open_session(system_prompt).send(message)

    def complete(self, history: tuple[ChatMessage, ...], session_id: str) -> str:
        reply = self._complete(history)
        if self.audit_log is not None:
            params = self._audit_params()
            turn = len(history)
            self.audit_log.append(session_id, turn - 1, history[-1].role,
                                  history[-1].content, params)
            self.audit_log.append(session_id, turn, "assistant", reply, params)
        return reply

    def _audit_params(self) -> dict:
        return {"model": self.model_id}

    def _complete(self, history: tuple[ChatMessage, ...]) -> str:
        raise NotImplementedError


class StubChatClient(ChatClient):
    """Deterministic scripted client: replies are consumed in order."""

    def __init__(self, replies, **kwargs):
        kwargs.setdefault("model_id", "stub")
        super().__init__(**kwargs)
        self._replies = list(replies)
        self._cursor = 0

    @property
    def remaining(self) -> int:
        return len(self._replies) - self._cursor

    def _complete(self, history: tuple[ChatMessage, ...]) -> str:
        with self._lock:
            if self._cursor >= len(self._replies):
                raise ScriptExhausted(
                    f"stub script exhausted after {self._cursor} replies"
                )
            reply = self._replies[self._cursor]
            self._cursor += 1
            return reply


class RateLimiter:
    """Serializes callers so requests stay under a per-minute budget.

    The clock and sleep functions are injectable so tests can use fake time.
    """

    def __init__(self, requests_per_minute: float, *, clock=time.monotonic,
                 sleep=time.sleep):
        if requests_per_minute <= 0:
            raise ValueError("requests_per_minute must be positive")
        self.interval = 60.0 / requests_per_minute
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_allowed = float("-inf")

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            wait = self._next_allowed - now
            if wait > 0:
                self._sleep(wait)
                now = self._clock()
            self._next_allowed = max(now, self._next_allowed) + self.interval


class HttpChatClient(ChatClient):
    """Adapter for chat-completion HTTP APIs (OpenAI wire format)."""

    def __init__(self, config: ProviderConfig, *, transport=None,
                 sleep=time.sleep, **kwargs):
        kwargs.setdefault("model_id", config.model)
        super().__init__(**kwargs)
        self.config = config
        self._sleep = sleep
        self._limiter = RateLimiter(config.requests_per_minute, sleep=sleep)
        self._http = httpx.Client(
            base_url=config.endpoint, timeout=120.0, transport=transport
        )

    def _audit_params(self) -> dict:
        return {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }

    def _headers(self) -> dict:
        key = os.environ.get(self.config.credential_env, "")
        if not key:
            raise ModelError(
                f"credential env var {self.config.credential_env} is not set"
            )
        return {"Authorization": f"Bearer {key}"}

    def _complete(self, history: tuple[ChatMessage, ...]) -> str:
        payload = {
            "model": self.config.model,
            "messages": [{"role": m.role, "content": m.content} for m in history],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        last_error = "no attempts made"
        for attempt in range(self.config.max_attempts):
            if attempt:
                delay = self.config.backoff_seconds * 2 ** (attempt - 1)
                self._sleep(delay + random.uniform(0, delay / 4))
            self._limiter.acquire()
            try:
                response = self._http.post(
                    "/chat/completions", json=payload, headers=self._headers()
                )
            except httpx.HTTPError as err:
                last_error = f"transport error: {err}"
                log.warning("model call failed (attempt %d): %s", attempt + 1, err)
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last_error = f"HTTP {response.status_code}"
                log.warning("model call failed (attempt %d): %s", attempt + 1,
                            last_error)
                continue
            if response.status_code != 200:
                raise ModelError(f"HTTP {response.status_code}: {response.text[:500]}")
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as err:
                raise ModelError(f"malformed completion payload: {err}") from err
        raise ModelError(
            f"model call failed after {self.config.max_attempts} attempts: {last_error}"
        )


def load_stub_scripts(path: str | Path) -> dict:
    """Stub script file: {"problems": {id: [replies...]}, "default": [...]}"""
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or "problems" not in doc and "default" not in doc:
        raise ValueError("stub script must carry 'problems' and/or 'default'")
    return doc


def make_client_factory(config: ProviderConfig, *, scripts: dict | None = None,
                        audit_log: AuditLog | None = None):
    """Per-problem client source.

    Stub providers get a fresh client per problem (each problem consumes its
    own script deterministically, even under parallel workers); HTTP
    providers share one client so rate limiting is global.
    """
    if config.provider == "stub":
        scripts = scripts or {}

        def factory(problem_id: str) -> ChatClient:
            replies = scripts.get("problems", {}).get(problem_id)
            if replies is None:
                replies = scripts.get("default", [])
            return StubChatClient(list(replies), audit_log=audit_log)

        return factory
    if config.provider == "openai":
        shared = HttpChatClient(config, audit_log=audit_log)
        return lambda problem_id: shared
    raise ValueError(f"unknown provider: {config.provider!r}")

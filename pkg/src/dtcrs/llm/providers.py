"""Chat-completion providers: an OpenAI-compatible HTTP client and a scripted mock."""

from __future__ import annotations

import hashlib
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Protocol, Union

import httpx

from ..chunker import split_sentences
from ..tokenize import truncate

STEPS = ("toc", "classify", "decompose", "summarize", "answer_freeform", "answer_choice")


class TransportError(RuntimeError):
    """The provider could not produce a reply (network, HTTP status, exhausted retries)."""


@dataclass(frozen=True)
class LlmRequest:
    step: str
    prompt: str
    temperature: float
    max_tokens: int
    # template inputs; visible to the mock's rules, never sent over the wire
    variables: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.step not in STEPS:
            raise ValueError(f"unknown step {self.step!r}")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class LlmProviderConfig:
    base_url: str = "https://api.openai.com/v1"
    model_name: str = "gpt-4o-mini"
    api_key: str | None = field(default=None, repr=False)
    timeout: float = 60.0
    max_retries: int = 3

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @classmethod
    def from_env(cls, **overrides: Any) -> LlmProviderConfig:
        env = {
            "api_key": os.environ.get("DTCRS_API_KEY"),
            "base_url": os.environ.get("DTCRS_BASE_URL"),
            "model_name": os.environ.get("DTCRS_MODEL"),
        }
        kwargs = {k: v for k, v in env.items() if v}
        kwargs.update(overrides)
        return cls(**kwargs)


class ChatProvider(Protocol):
    def complete(self, request: LlmRequest) -> str: ...


class HttpChatProvider:
    """POSTs to ``{base_url}/chat/completions`` with exponential-backoff retries."""

    RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}

    def __init__(self, config: LlmProviderConfig, client: httpx.Client | None = None, backoff: float = 1.0):
        self.config = config
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=config.timeout)

    def complete(self, request: LlmRequest) -> str:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {self.config.api_key}"} if self.config.api_key else {}
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        last: str = ""
        for attempt in range(self.config.max_retries + 1):
            try:
                resp = self._client.post(url, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code == 200:
                    try:
                        return resp.json()["choices"][0]["message"]["content"] or ""
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise TransportError(f"malformed completion response: {exc}") from exc
                last = f"HTTP {resp.status_code}"
                if resp.status_code not in self.RETRY_STATUS:
                    break
            if attempt < self.config.max_retries:
                time.sleep(self.backoff * 2**attempt)
        raise TransportError(f"{request.step}: request failed ({last})")


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


Reply = Union[str, Callable[[LlmRequest], str], BaseException, type]


def _echo_toc(req: LlmRequest) -> str:
    text = req.variables.get("document", "")
    spans = split_sentences(text)
    if not spans:
        return ""
    picks = sorted({round(i * (len(spans) - 1) / 3) for i in range(4)}) if len(spans) > 1 else [0]
    lines = []
    for n, idx in enumerate(picks, 1):
        s = spans[idx]
        heading, _ = truncate(text[s.start:s.end], 6)
        lines.append(f"{n}. {heading.strip()}")
    return "\n".join(lines)


def _echo_decompose(req: LlmRequest) -> str:
    entries = req.variables.get("toc_entries") or ()
    if not entries:
        return req.variables.get("question", "")
    return "\n".join(f"{i}. What does the document say about {h}?" for i, (_, h) in enumerate(entries, 1))


def _echo_prefix(req: LlmRequest) -> str:
    return truncate(req.variables.get("context", ""), 10)[0]


def _echo_answer(req: LlmRequest) -> str:
    items = req.variables.get("context_items") or ()
    return truncate(items[0], 10)[0] if items else "Unanswerable"


DEFAULT_RULES: dict[str, Reply] = {
    "toc": _echo_toc,
    "classify": "0",
    "decompose": _echo_decompose,
    "summarize": _echo_prefix,
    "answer_freeform": _echo_answer,
    "answer_choice": "A",
}


class MockProvider:
    """Offline provider with scripted replies.

    ``script`` maps either ``(step, prompt_digest)`` or a bare step name to a
    reply. A reply is a string, a callable taking the :class:`LlmRequest`, or
    an exception (raised as a :class:`TransportError`). Unscripted requests
    fall back to deterministic echo rules: summaries echo the first 10 tokens
    of their context, decomposition asks one question per ToC heading, the
    classifier answers 0.
    """

    def __init__(self, script: Mapping[Any, Reply] | None = None):
        self.script = dict(script or {})
        self.log: list[tuple[LlmRequest, str]] = []
        self._lock = threading.Lock()

    def complete(self, request: LlmRequest) -> str:
        key = (request.step, prompt_digest(request.prompt))
        rule = self.script.get(key, self.script.get(request.step, DEFAULT_RULES[request.step]))
        if isinstance(rule, BaseException) or (isinstance(rule, type) and issubclass(rule, BaseException)):
            with self._lock:
                self.log.append((request, "<error>"))
            raise TransportError(f"{request.step}: scripted failure ({rule!r})")
        reply = rule(request) if callable(rule) else str(rule)
        with self._lock:
            self.log.append((request, reply))
        return reply

    def requests(self, step: str | None = None) -> list[LlmRequest]:
        with self._lock:
            return [r for r, _ in self.log if step is None or r.step == step]

    def count(self, step: str | None = None) -> int:
        return len(self.requests(step))

    def transcript(self) -> list[tuple[str, str, str]]:
        with self._lock:
            return [(r.step, prompt_digest(r.prompt), reply) for r, reply in self.log]

    def clear(self) -> None:
        with self._lock:
            self.log.clear()


"""LLM backends: an OpenAI-compatible HTTP client and a scripted stand-in."""
from __future__ import annotations

import logging
import os
import random
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol, Union

import httpx

log = logging.getLogger(__name__)

ENV_API_KEY = "MIDISTRING_API_KEY"
ENV_API_BASE = "MIDISTRING_API_BASE"
ENV_MODEL = "MIDISTRING_MODEL"
DEFAULT_API_BASE = "https://api.openai.com/v1"
DEFAULT_MODEL = "gpt-4"


class BackendError(RuntimeError):
    kind = "BackendError"


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    temperature: float
    max_tokens: int = 1200

    def __post_init__(self):
        if not 0 < self.temperature <= 2:
            raise ValueError(f"temperature {self.temperature} outside (0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


class LlmBackend(Protocol):
    def complete(self, request: CompletionRequest) -> str:
        ...


class RemoteHttpBackend:
    """Chat-completions client with jittered exponential backoff on 429/5xx."""

    retry_status = {429, 500, 502, 503, 504}

    def __init__(self, api_key: str | None = None, api_base: str | None = None, model: str | None = None,
                 timeout: float = 120.0, max_retries: int = 5, base_delay: float = 1.0, factor: float = 2.0,
                 client: httpx.Client | None = None, sleep: Callable[[float], None] = time.sleep,
                 rng: random.Random | None = None):
        self.api_key = api_key or os.environ.get(ENV_API_KEY)
        if not self.api_key:
            raise BackendError(f"no API key; set {ENV_API_KEY}")
        self.api_base = (api_base or os.environ.get(ENV_API_BASE) or DEFAULT_API_BASE).rstrip("/")
        self.model = model or os.environ.get(ENV_MODEL) or DEFAULT_MODEL
        self.max_retries = max_retries
        self.base_delay = base_delay
        self.factor = factor
        self.client = client or httpx.Client(timeout=timeout)
        self.sleep = sleep
        self.rng = rng or random.Random()

    def payload(self, request: CompletionRequest) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }

    def complete(self, request: CompletionRequest) -> str:
        url = f"{self.api_base}/chat/completions"
        headers = {"Authorization": f"Bearer {self.api_key}", "Content-Type": "application/json"}
        for attempt in range(self.max_retries + 1):
            try:
                resp = self.client.post(url, json=self.payload(request), headers=headers)
            except httpx.HTTPError as exc:
                err = BackendError(f"transport error: {exc}")
                retryable = True
            else:
                if resp.status_code == 200:
                    try:
                        return resp.json()["choices"][0]["message"]["content"]
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise BackendError(f"unexpected response body: {exc}") from exc
                err = BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                retryable = resp.status_code in self.retry_status
            if not retryable or attempt == self.max_retries:
                raise err
            delay = self.base_delay * self.factor ** attempt
            delay *= 0.5 + self.rng.random()  # jitter in [0.5, 1.5)
            log.warning("%s; retrying in %.2fs (%d/%d)", err, delay, attempt + 1, self.max_retries)
            self.sleep(delay)
        raise AssertionError("unreachable")


class ScriptedBackend:
    """Replies from a fixed list (cycled) or a callable of the request."""

    def __init__(self, replies: Union[Iterable[str], Callable[[CompletionRequest], str]]):
        self._fn = replies if callable(replies) else None
        self._replies = None if callable(replies) else list(replies)
        self.requests: list[CompletionRequest] = []

    def complete(self, request: CompletionRequest) -> str:
        self.requests.append(request)
        if self._fn is not None:
            return self._fn(request)
        return self._replies[(len(self.requests) - 1) % len(self._replies)]

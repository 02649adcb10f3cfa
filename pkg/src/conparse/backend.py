"""Text-completion backends: an HTTP client and a deterministic scripted mock.

Both backends log every (request, response) pair, and a log can be written
back out as a script file, so any run against the HTTP backend can be
replayed offline byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import requests


class BackendError(Exception):
    """Base class for completion failures."""


class Timeout(BackendError):
    pass


class RateLimited(BackendError):
    pass


class AuthFailure(BackendError):
    pass


class UnmappedPrompt(BackendError):
    """The scripted backend has no response for this prompt."""


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    temperature: float = 0.0
    max_tokens: int = 2048
    model_id: str = ""

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_reason: str = "stop"  # stop | length | error


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


WILDCARD = "*"


class CompletionBackend:
    """Base backend: request logging and thread-safe bookkeeping."""

    def __init__(self):
        self._log: list[tuple[CompletionRequest, CompletionResponse]] = []
        self._lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        response = self._complete(request)
        with self._lock:
            self._log.append((request, response))
        return response

    def _complete(self, request: CompletionRequest) -> CompletionResponse:
        raise NotImplementedError

    @property
    def request_log(self) -> tuple[tuple[CompletionRequest, CompletionResponse], ...]:
        with self._lock:
            return tuple(self._log)

    def write_script(self, path: str | Path) -> None:
        """Dump the log as a replayable script, grouped by prompt hash."""
        grouped: dict[str, list[str]] = {}
        order: list[str] = []
        for request, response in self.request_log:
            sha = prompt_sha256(request.prompt)
            if sha not in grouped:
                grouped[sha] = []
                order.append(sha)
            grouped[sha].append(response.text)
        with open(path, "w", encoding="utf-8") as fh:
            for sha in order:
                fh.write(json.dumps(
                    {"prompt_sha256": sha, "responses": grouped[sha]},
                    sort_keys=True, ensure_ascii=False,
                ) + "\n")


class ScriptedBackend(CompletionBackend):
    """Replays canned responses keyed by prompt hash.

    A prompt mapped to several responses yields them in order on successive
    calls (the cursor is advanced under a lock) and repeats the last one when
    exhausted. Entries keyed "*" act as a fallback queue for any unmapped
    prompt. Prompts with neither a mapping nor a fallback raise
    UnmappedPrompt.
    """

    def __init__(
        self,
        by_sha: Mapping[str, Sequence[str]] | None = None,
        *,
        by_prompt: Mapping[str, Sequence[str]] | None = None,
        default: Sequence[str] | None = None,
    ):
        super().__init__()
        self._responses: dict[str, list[str]] = {}
        self._cursors: dict[str, int] = {}
        for sha, responses in (by_sha or {}).items():
            self._add(sha, responses)
        for prompt, responses in (by_prompt or {}).items():
            self._add(prompt_sha256(prompt), responses)
        if default is not None:
            self._add(WILDCARD, default)

    def _add(self, key: str, responses: Sequence[str]) -> None:
        self._responses.setdefault(key, []).extend(responses)
        self._cursors.setdefault(key, 0)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        backend = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                    sha = entry["prompt_sha256"]
                    responses = entry["responses"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise BackendError(f"{path}:{lineno}: bad script entry: {exc}")
                backend._add(sha, list(responses))
        return backend

    def _complete(self, request: CompletionRequest) -> CompletionResponse:
        sha = prompt_sha256(request.prompt)
        with self._lock:
            key = sha if sha in self._responses else WILDCARD
            if key not in self._responses:
                raise UnmappedPrompt(f"no scripted response for prompt {sha[:12]}...")
            responses = self._responses[key]
            cursor = self._cursors[key]
            text = responses[min(cursor, len(responses) - 1)]
            self._cursors[key] = cursor + 1
        return CompletionResponse(text=text, finish_reason="stop")


ENV_API_KEY = "CONPARSE_API_KEY"
ENV_API_BASE = "CONPARSE_API_BASE"
ENV_MODEL = "CONPARSE_MODEL"

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class HTTPBackend(CompletionBackend):
    """Chat-completions HTTP client with bounded exponential-backoff retries."""

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        model: str = "",
        *,
        max_retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 60.0,
        session=None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        super().__init__()
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout
        self._session = session or requests.Session()
        self._sleep = sleep

    @classmethod
    def from_env(cls, **kwargs) -> "HTTPBackend":
        base = os.environ.get(ENV_API_BASE)
        if not base:
            raise AuthFailure(f"{ENV_API_BASE} is not set")
        return cls(
            base_url=base,
            api_key=os.environ.get(ENV_API_KEY),
            model=os.environ.get(ENV_MODEL, ""),
            **kwargs,
        )

    def _complete(self, request: CompletionRequest) -> CompletionResponse:
        url = f"{self.base_url}/chat/completions"
        body = {
            "model": request.model_id or self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: BackendError | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._session.post(
                    url, json=body, headers=headers, timeout=self.timeout
                )
            except requests.Timeout as exc:
                last_error = Timeout(str(exc))
                continue
            except requests.ConnectionError as exc:
                last_error = BackendError(str(exc))
                continue
            if resp.status_code in (401, 403):
                raise AuthFailure(f"HTTP {resp.status_code}: {resp.text[:200]}")
            if resp.status_code == 429:
                last_error = RateLimited(resp.text[:200])
                continue
            if resp.status_code in _RETRYABLE_STATUS:
                last_error = BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                continue
            if resp.status_code != 200:
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                payload = resp.json()
                choice = payload["choices"][0]
                text = choice["message"]["content"]
                finish = choice.get("finish_reason") or "stop"
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"malformed completion payload: {exc}")
            return CompletionResponse(text=text, finish_reason=finish)
        raise last_error if last_error else BackendError("request failed")

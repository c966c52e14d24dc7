"""LLM communication: chat completions, embeddings, response cache, retries, scripted mock."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, TypeVar

import httpx
import numpy as np

from .errors import (
    AuthFailure,
    EmbeddingUnavailable,
    EmptyResponse,
    GatewayError,
    LlmUnreachable,
    RateLimited,
    RequestRejected,
    TransientError,
)

log = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_ENDPOINT = "https://api.openai.com/v1"
DEFAULT_TOKEN_PATH = Path("security") / "token-key.jwt"
TOKEN_PATH_ENV = "MORPHTEST_TOKEN_PATH"


class ProviderKind(str, Enum):
    REMOTE = "remote"
    SCRIPTED_MOCK = "scripted_mock"


# -- scripted mock -----------------------------------------------------------

Matcher = str | re.Pattern | Callable[[str], bool]


@dataclass(frozen=True)
class MockRule:
    """``matcher`` is a substring, a compiled regex (searched), or a predicate.

    With ``exact=True`` a string matcher must equal the whole prompt.
    """
    matcher: Matcher
    response: str
    exact: bool = False

    def matches(self, prompt: str) -> bool:
        m = self.matcher
        if isinstance(m, re.Pattern):
            return m.search(prompt) is not None
        if callable(m):
            return bool(m(prompt))
        return prompt == m if self.exact else m in prompt


class MockScript:
    def __init__(self, rules: Iterable[MockRule | tuple] = (), default_response: str = ""):
        self.rules = [r if isinstance(r, MockRule) else MockRule(*r) for r in rules]
        self.default_response = default_response
        self.call_log: list[str] = []
        self._lock = threading.Lock()

    def respond(self, prompt: str) -> str:
        with self._lock:
            self.call_log.append(prompt)
        for rule in self.rules:
            if rule.matches(prompt):
                return rule.response
        return self.default_response


@dataclass(frozen=True)
class LlmHandle:
    model_id: str
    endpoint: str = DEFAULT_ENDPOINT
    provider_kind: ProviderKind = ProviderKind.REMOTE
    temperature: float = 0.0
    max_tokens: int | None = None
    auth_token_source: Path | None = None
    script: MockScript | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "provider_kind", ProviderKind(self.provider_kind))
        if self.provider_kind is ProviderKind.REMOTE and not self.endpoint:
            raise ValueError("remote LLM handle needs an endpoint")
        if self.provider_kind is ProviderKind.SCRIPTED_MOCK and self.script is None:
            raise ValueError("mock LLM handle needs a script")

    @classmethod
    def mock(cls, model_id: str, script: MockScript) -> "LlmHandle":
        return cls(model_id, endpoint="", provider_kind=ProviderKind.SCRIPTED_MOCK, script=script)

    def with_model(self, model_id: str) -> "LlmHandle":
        return LlmHandle(model_id, self.endpoint, self.provider_kind, self.temperature,
                         self.max_tokens, self.auth_token_source, self.script)


# -- retry -------------------------------------------------------------------

@dataclass
class RetryPolicy:
    max_attempts: int = 4
    base_delay: float = 1.0
    multiplier: float = 2.0
    max_delay: float = 30.0
    sleep: Callable[[float], None] = field(default=time.sleep, repr=False)

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    def delay(self, attempt: int, error: BaseException | None = None) -> float:
        if isinstance(error, RateLimited) and error.retry_after is not None:
            return min(error.retry_after, self.max_delay)
        return min(self.base_delay * self.multiplier ** (attempt - 1), self.max_delay)


def with_retry(call: Callable[[], T], policy: RetryPolicy) -> T:
    """Run ``call``, retrying transient failures with exponential backoff.

    Auth failures and rejected requests propagate immediately. When attempts
    run out, raises LlmUnreachable carrying the last transient error.
    """
    last: TransientError | None = None
    for attempt in range(1, policy.max_attempts + 1):
        try:
            return call()
        except TransientError as exc:
            last = exc
            log.warning("attempt %d/%d failed: %s", attempt, policy.max_attempts, exc)
            if attempt < policy.max_attempts:
                policy.sleep(policy.delay(attempt, exc))
    raise LlmUnreachable(f"gave up after {policy.max_attempts} attempts: {last}", last) from last


# -- cache -------------------------------------------------------------------

def cache_key(*parts) -> str:
    blob = json.dumps(parts, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CacheEntry:
    key: str
    value: str
    created_at: str


class ResponseCache:
    """Persistent response cache, one JSON file per entry under ``directory``.

    Entries are never evicted.
    """

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else None
        self._mem: dict[str, CacheEntry] = {}
        self._lock = threading.Lock()
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)

    def _file(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> str | None:
        with self._lock:
            entry = self._mem.get(key)
        if entry is not None:
            return entry.value
        if self.directory is None:
            return None
        try:
            data = json.loads(self._file(key).read_text(encoding="utf-8"))
            entry = CacheEntry(data["key"], data["value"], data["created_at"])
        except (OSError, ValueError, KeyError):
            return None
        if entry.key != key:
            return None
        with self._lock:
            self._mem[key] = entry
        return entry.value

    def put(self, key: str, value: str) -> None:
        entry = CacheEntry(key, value, datetime.now(timezone.utc).isoformat())
        with self._lock:
            self._mem[key] = entry
        if self.directory is None:
            return
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=self.directory)
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                json.dump(entry.__dict__, f, ensure_ascii=False)
            os.replace(tmp, self._file(key))
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise

    def __contains__(self, key: str) -> bool:
        return self.get(key) is not None

    def __len__(self) -> int:
        if self.directory is None:
            return len(self._mem)
        return sum(1 for p in self.directory.glob("*.json") if not p.name.startswith("."))


# -- offline embeddings ------------------------------------------------------

_TOKEN = re.compile(r"\w+")


class HashingEmbedder:
    """Deterministic bag-of-words embedding: tokens hashed into ``dim`` count buckets."""

    def __init__(self, dim: int = 512):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for tok in _TOKEN.findall(text.lower()):
            h = hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest()
            vec[int.from_bytes(h, "big") % self.dim] += 1.0
        return vec


class _HandleEmbedder:
    def __init__(self, gateway: "Gateway", handle: LlmHandle):
        self.gateway = gateway
        self.handle = handle

    def embed(self, text: str) -> np.ndarray:
        return self.gateway.embed(self.handle, text)


# -- gateway -----------------------------------------------------------------

def _raise_for_status(resp: httpx.Response) -> None:
    code = resp.status_code
    if code < 400:
        return
    detail = resp.text[:200]
    if code in (401, 403):
        raise AuthFailure(f"HTTP {code}: {detail}")
    if code == 429:
        retry_after = resp.headers.get("retry-after")
        try:
            wait = float(retry_after) if retry_after is not None else None
        except ValueError:
            wait = None
        raise RateLimited(f"HTTP 429: {detail}", wait)
    if code >= 500 or code == 408:
        raise TransientError(f"HTTP {code}: {detail}")
    raise RequestRejected(f"HTTP {code}: {detail}")


class Gateway:
    """Entry point for every LLM call.

    Safe to share between worker threads: at most ``max_concurrent_requests``
    outbound HTTP requests are in flight, and ``requests_sent`` counts them.
    """

    def __init__(self, cache: ResponseCache | None = None, retry: RetryPolicy | None = None,
                 client: httpx.Client | None = None, max_concurrent_requests: int = 4,
                 timeout: float = 120.0, mock_embedder: HashingEmbedder | None = None):
        self.cache = cache if cache is not None else ResponseCache()
        self.retry = retry or RetryPolicy()
        self._client = client
        self._timeout = timeout
        self._slots = threading.BoundedSemaphore(max_concurrent_requests)
        self._count_lock = threading.Lock()
        self._tokens: dict[Path, str | None] = {}
        self.mock_embedder = mock_embedder or HashingEmbedder()
        self.requests_sent = 0

    @property
    def client(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(timeout=self._timeout)
        return self._client

    def close(self) -> None:
        if self._client is not None:
            self._client.close()

    def _token(self, handle: LlmHandle) -> str | None:
        path = handle.auth_token_source or Path(os.environ.get(TOKEN_PATH_ENV, DEFAULT_TOKEN_PATH))
        if path not in self._tokens:
            try:
                self._tokens[path] = path.read_text(encoding="utf-8").strip() or None
            except OSError:
                self._tokens[path] = None
        return self._tokens[path]

    def _post(self, handle: LlmHandle, route: str, body: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        token = self._token(handle)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        url = handle.endpoint.rstrip("/") + route

        def attempt() -> dict:
            with self._slots:
                with self._count_lock:
                    self.requests_sent += 1
                try:
                    resp = self.client.post(url, json=body, headers=headers)
                except httpx.HTTPError as exc:
                    raise TransientError(f"{type(exc).__name__}: {exc}") from exc
            _raise_for_status(resp)
            try:
                return resp.json()
            except ValueError as exc:
                raise RequestRejected(f"response is not JSON: {resp.text[:200]}") from exc

        return with_retry(attempt, self.retry)

    def complete(self, handle: LlmHandle, prompt: str) -> str:
        if handle.provider_kind is ProviderKind.SCRIPTED_MOCK:
            text = handle.script.respond(prompt)
            if not text.strip():
                raise EmptyResponse(f"{handle.model_id}: empty response")
            return text

        key = cache_key("chat", handle.model_id, handle.endpoint, prompt,
                        handle.temperature, handle.max_tokens)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        body = {"model": handle.model_id,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": handle.temperature}
        if handle.max_tokens is not None:
            body["max_tokens"] = handle.max_tokens
        data = self._post(handle, "/chat/completions", body)
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise RequestRejected(f"malformed chat completion: {str(data)[:200]}") from exc
        if not isinstance(text, str) or not text.strip():
            raise EmptyResponse(f"{handle.model_id}: empty response")
        self.cache.put(key, text)
        return text

    def embed(self, handle: LlmHandle, text: str) -> np.ndarray:
        if handle.provider_kind is ProviderKind.SCRIPTED_MOCK:
            return self.mock_embedder.embed(text)

        key = cache_key("embed", handle.model_id, handle.endpoint, text)
        hit = self.cache.get(key)
        if hit is not None:
            return np.asarray(json.loads(hit), dtype=float)
        try:
            data = self._post(handle, "/embeddings", {"model": handle.model_id, "input": text})
            vec = [float(x) for x in data["data"][0]["embedding"]]
        except AuthFailure:
            raise
        except (GatewayError, KeyError, IndexError, TypeError, ValueError) as exc:
            raise EmbeddingUnavailable(f"{handle.model_id}: {exc}") from exc
        self.cache.put(key, json.dumps(vec))
        return np.asarray(vec, dtype=float)

    def embedder(self, handle: LlmHandle) -> _HandleEmbedder:
        """Adapt ``handle`` to the comparators' embedding-provider interface."""
        return _HandleEmbedder(self, handle)

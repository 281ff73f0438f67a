"""Completion backends: OpenAI-compatible HTTP client, JSONL response cache,
and a deterministic replay backend for offline tests.

Every backend exposes `complete(prompt) -> Completion`, a `model_id`, and a
shared `CostLedger`. Backends are safe for concurrent `complete` calls; the
cache serializes appends internally and ledger updates are atomic.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Protocol

import httpx

log = logging.getLogger(__name__)

RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})
BACKOFF_BASE_S = 1.0
BACKOFF_FACTOR = 2.0
BACKOFF_JITTER = 0.2
BACKOFF_CAP_S = 60.0


class BackendConfigError(Exception):
    """Fatal configuration problem (missing credential, rejected auth)."""


class BackendRequestError(Exception):
    """A completion request failed after exhausting retries, or a replay
    fixture was missing. Recorded per sentence, never fatal to a batch."""


@dataclass(frozen=True)
class PriceTable:
    """Currency per 1K input/output tokens."""

    input_per_1k: float
    output_per_1k: float
    currency: str = "USD"


@dataclass(frozen=True)
class BackendConfig:
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    model_id: str = "gpt-4-turbo-2024-04-09"
    credential_env: str = "GENDERSCOPE_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    prices: PriceTable | None = None

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be > 0, got {self.timeout}")


@dataclass(frozen=True)
class Completion:
    """One completion: assistant text plus whatever usage the backend reported."""

    text: str
    model_id: str
    input_tokens: int = 0
    output_tokens: int = 0
    cached: bool = False


class CostLedger:
    """Thread-safe run counters. request_count counts every completion
    attempt (HTTP attempts, replay lookups, and cache hits), so
    request_count = cache_hits + physical backend invocations."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.total_input_tokens = 0
        self.total_output_tokens = 0
        self.request_count = 0
        self.cache_hits = 0

    def record_attempt(self) -> None:
        with self._lock:
            self.request_count += 1

    def record_usage(self, input_tokens: int, output_tokens: int) -> None:
        with self._lock:
            self.total_input_tokens += input_tokens
            self.total_output_tokens += output_tokens

    def record_cache_hit(self) -> None:
        with self._lock:
            self.request_count += 1
            self.cache_hits += 1

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "total_input_tokens": self.total_input_tokens,
                "total_output_tokens": self.total_output_tokens,
                "request_count": self.request_count,
                "cache_hits": self.cache_hits,
            }


def estimate_cost(ledger: CostLedger, prices: PriceTable | None) -> float | None:
    """Estimated spend, or None when no price table is configured."""
    if prices is None:
        return None
    snap = ledger.snapshot()
    return (
        snap["total_input_tokens"] / 1000.0 * prices.input_per_1k
        + snap["total_output_tokens"] / 1000.0 * prices.output_per_1k
    )


class Backend(Protocol):
    model_id: str
    ledger: CostLedger

    def complete(self, prompt: str) -> Completion: ...


class HttpBackend:
    """Chat-completions client for OpenAI-compatible endpoints.

    Sends a single user message with no sampling-parameter overrides and
    reads the first choice's message content. Transient failures (429, 5xx,
    timeouts) are retried with exponential backoff and jitter; authentication
    failures are fatal.
    """

    def __init__(
        self,
        config: BackendConfig,
        ledger: CostLedger | None = None,
        *,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        api_key = os.environ.get(config.credential_env, "")
        if not api_key:
            raise BackendConfigError(
                f"credential environment variable {config.credential_env} is not set"
            )
        self.config = config
        self.model_id = config.model_id
        self.ledger = ledger if ledger is not None else CostLedger()
        self._api_key = api_key
        self._sleep = sleep
        self._rng = random.Random()
        self._client = httpx.Client(timeout=config.timeout)

    def _backoff(self, retry_index: int) -> float:
        delay = min(BACKOFF_CAP_S, BACKOFF_BASE_S * BACKOFF_FACTOR**retry_index)
        return delay * (1.0 + self._rng.uniform(-BACKOFF_JITTER, BACKOFF_JITTER))

    def complete(self, prompt: str) -> Completion:
        payload = {
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": prompt}],
        }
        headers = {"Authorization": f"Bearer {self._api_key}"}
        attempts = self.config.max_retries + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            self.ledger.record_attempt()
            try:
                response = self._client.post(self.config.endpoint_url, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                last_error = exc
                if attempt + 1 < attempts:
                    self._sleep(self._backoff(attempt))
                continue
            if response.status_code in (401, 403):
                raise BackendConfigError(
                    f"authentication rejected (HTTP {response.status_code}) by {self.config.endpoint_url}"
                )
            if response.status_code in RETRYABLE_STATUS:
                last_error = BackendRequestError(f"HTTP {response.status_code}: {response.text[:200]}")
                if attempt + 1 < attempts:
                    self._sleep(self._backoff(attempt))
                continue
            if response.status_code != 200:
                raise BackendRequestError(f"HTTP {response.status_code}: {response.text[:200]}")
            data = response.json()
            try:
                text = data["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise BackendRequestError(f"malformed completion response: {exc}") from exc
            usage = data.get("usage") or {}
            input_tokens = int(usage.get("prompt_tokens", 0))
            output_tokens = int(usage.get("completion_tokens", 0))
            self.ledger.record_usage(input_tokens, output_tokens)
            return Completion(text, data.get("model", self.config.model_id), input_tokens, output_tokens)
        raise BackendRequestError(f"request failed after {attempts} attempts: {last_error}")

    def close(self) -> None:
        self._client.close()


def replay_key(prompt: str) -> str:
    """Fixture key: SHA-256 hex digest of the full prompt text."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def write_replay_fixture(prompt_to_response: Mapping[str, str], path: str | Path) -> None:
    """Write a replay fixture file, one {key, response_text} JSONL record per
    prompt, keyed with replay_key."""
    with open(path, "w", encoding="utf-8") as fh:
        for prompt, response in prompt_to_response.items():
            record = {"key": replay_key(prompt), "response_text": response}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


class ReplayBackend:
    """Canned-response backend: a pure function of its fixture file.

    Misses raise a deterministic BackendRequestError. Token usage is always
    reported as zero (nothing is billed offline).
    """

    def __init__(
        self,
        fixture_path: str | Path,
        model_id: str = "replay",
        ledger: CostLedger | None = None,
    ) -> None:
        self.model_id = model_id
        self.ledger = ledger if ledger is not None else CostLedger()
        self._responses: dict[str, str] = {}
        for i, line in enumerate(Path(fixture_path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                self._responses[record["key"]] = record["response_text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{fixture_path}: bad replay fixture line {i}: {exc}") from exc

    def complete(self, prompt: str) -> Completion:
        self.ledger.record_attempt()
        key = replay_key(prompt)
        if key not in self._responses:
            raise BackendRequestError(f"replay fixture missing for prompt key {key[:16]}")
        self.ledger.record_usage(0, 0)
        return Completion(self._responses[key], self.model_id, 0, 0)


@dataclass(frozen=True)
class CacheEntry:
    key: str
    response_text: str
    input_tokens: int
    output_tokens: int
    timestamp: float


def cache_key(model_id: str, prompt: str, params: Mapping | None = None) -> str:
    """Cache key over (model, full prompt text, sampling params), so template
    or few-shot changes invalidate entries."""
    doc = json.dumps(
        {"model": model_id, "prompt": prompt, "params": dict(params or {})},
        ensure_ascii=False,
        sort_keys=True,
    )
    return hashlib.sha256(doc.encode("utf-8")).hexdigest()


class CachedBackend:
    """Persistent JSONL cache around any backend.

    Hits return the stored response without calling the inner backend and
    bill zero new tokens; misses call through and append an entry. Corrupt
    cache lines are skipped with a warning, never fatal.
    """

    def __init__(self, inner: Backend, cache_path: str | Path) -> None:
        self.inner = inner
        self.model_id = inner.model_id
        self.ledger = inner.ledger
        self.cache_path = Path(cache_path)
        self._lock = threading.Lock()
        self._entries: dict[str, CacheEntry] = {}
        self.corrupt_lines = 0
        if self.cache_path.exists():
            for i, line in enumerate(
                self.cache_path.read_text(encoding="utf-8").splitlines(), start=1
            ):
                if not line.strip():
                    continue
                try:
                    doc = json.loads(line)
                    entry = CacheEntry(
                        key=doc["key"],
                        response_text=doc["response_text"],
                        input_tokens=int(doc.get("input_tokens", 0)),
                        output_tokens=int(doc.get("output_tokens", 0)),
                        timestamp=float(doc.get("timestamp", 0.0)),
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                    self.corrupt_lines += 1
                    log.warning("skipping corrupt cache line %d in %s", i, self.cache_path)
                    continue
                self._entries[entry.key] = entry

    def __len__(self) -> int:
        return len(self._entries)

    def complete(self, prompt: str) -> Completion:
        key = cache_key(self.model_id, prompt)
        with self._lock:
            entry = self._entries.get(key)
        if entry is not None:
            self.ledger.record_cache_hit()
            return Completion(
                entry.response_text, self.model_id, entry.input_tokens, entry.output_tokens, cached=True
            )
        completion = self.inner.complete(prompt)
        entry = CacheEntry(
            key=key,
            response_text=completion.text,
            input_tokens=completion.input_tokens,
            output_tokens=completion.output_tokens,
            timestamp=time.time(),
        )
        record = {
            "key": entry.key,
            "response_text": entry.response_text,
            "input_tokens": entry.input_tokens,
            "output_tokens": entry.output_tokens,
            "timestamp": entry.timestamp,
        }
        with self._lock:
            self._entries[key] = entry
            with open(self.cache_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        return completion


def cached(inner: Backend, cache_path: str | Path) -> CachedBackend:
    """Wrap a backend with the persistent response cache."""
    return CachedBackend(inner, cache_path)

"""Text-generation backends: an OpenAI-compatible HTTP client and offline mocks."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import httpx
import numpy as np

from .errors import ConfigurationError, GenerationError
from .fileio import atomic_write
from .rng import derive_seed

__all__ = [
    "BACKENDS",
    "GeneratorConfig",
    "GenerationRecord",
    "ResponseCache",
    "TextGenerator",
    "prompt_hash",
    "build_request",
    "parse_response",
]

log = logging.getLogger(__name__)

BACKENDS = ("openai_compatible", "mock_echo", "mock_resample")
SEPARATOR = "###"
DEFAULT_API_KEY_ENV = "LEAKFORGE_API_KEY"


@dataclass(frozen=True)
class GeneratorConfig:
    backend: str = "mock_resample"
    model_name: str = "mock"
    endpoint_url: str = "https://api.openai.com/v1"
    api_key_env: str = DEFAULT_API_KEY_ENV
    temperature: float = 1.0
    timeout: float = 120.0
    max_parallel: int = 4
    max_tokens: int | None = None
    mock_seed: int = 0
    retry_backoff: float = 1.0

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigurationError(f"unknown generator backend {self.backend!r}; expected one of {BACKENDS}")
        if self.max_parallel < 1:
            raise ConfigurationError("max_parallel must be >= 1")
        if self.timeout <= 0:
            raise ConfigurationError("timeout must be positive")
        if self.retry_backoff < 0:
            raise ConfigurationError("retry_backoff must be >= 0")

    @property
    def is_mock(self) -> bool:
        return self.backend != "openai_compatible"

    def with_seed(self, seed: int) -> "GeneratorConfig":
        return replace(self, mock_seed=seed)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class GenerationRecord:
    prompt_hash: str
    model_name: str
    raw_response: str
    latency: float = 0.0
    token_usage: dict | None = None
    temperature: float | None = None

    def to_json(self) -> dict:
        return asdict(self)


def prompt_hash(prompt_text: str) -> str:
    return hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()


def build_request(prompt_text: str, config: GeneratorConfig) -> dict:
    body = {
        "model": config.model_name,
        "messages": [{"role": "user", "content": prompt_text}],
        "temperature": config.temperature,
    }
    if config.max_tokens is not None:
        body["max_tokens"] = config.max_tokens
    return body


def parse_response(payload) -> tuple[str, dict | None]:
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise GenerationError("malformed chat-completion response", retryable=False) from exc
    if not isinstance(content, str):
        raise GenerationError("chat-completion content is not text", retryable=False)
    usage = payload.get("usage") if isinstance(payload, dict) else None
    return content, usage


class ResponseCache:
    """Completions stored as ``<root>/<model_name>/<prompt_hash>.json``."""

    def __init__(self, root):
        self.root = Path(root)

    def _path(self, model_name: str, key: str) -> Path:
        safe_model = model_name.replace("/", "_")
        return self.root / safe_model / f"{key}.json"

    def lookup(self, model_name: str, key: str) -> GenerationRecord | None:
        path = self._path(model_name, key)
        if not path.is_file():
            return None
        try:
            data = json.loads(path.read_text("utf-8"))
            return GenerationRecord(**data)
        except (OSError, ValueError, TypeError) as exc:
            log.warning("ignoring corrupt cache entry %s: %s", path, exc)
            return None

    def store(self, record: GenerationRecord, key: str | None = None) -> None:
        path = self._path(record.model_name, key or record.prompt_hash)
        atomic_write(path, json.dumps(record.to_json(), sort_keys=True, indent=1))


class TextGenerator:
    """The text-generation port used by the augmentor.

    Mock backends never touch the cache or the network. Safe to call from
    several threads; the counters are guarded by a lock.
    """

    def __init__(self, config: GeneratorConfig, cache: ResponseCache | None = None,
                 transport: httpx.BaseTransport | None = None):
        self.config = config
        self.cache = cache
        self._transport = transport
        self._client: httpx.Client | None = None
        self._lock = threading.Lock()
        self.network_calls = 0
        self.cache_hits = 0

    def close(self):
        if self._client is not None:
            self._client.close()
            self._client = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def backoff(self, attempt: int) -> float:
        """Seconds to wait before retry number ``attempt`` (1-based); mocks never wait."""
        if self.config.is_mock:
            return 0.0
        return self.config.retry_backoff * 2 ** (attempt - 1)

    def complete(self, batch, attempt: int = 0) -> GenerationRecord:
        """Generate for one prompt batch.

        ``attempt`` > 0 marks a retry; retries get their own cache slot so a
        cached bad answer is not replayed.
        """
        phash = prompt_hash(batch.prompt_text)
        if self.config.backend == "mock_echo":
            return GenerationRecord(phash, self.config.model_name, SEPARATOR.join(batch.examples),
                                    temperature=self.config.temperature)
        if self.config.backend == "mock_resample":
            text = _resample(batch, derive_seed(self.config.mock_seed, phash, attempt))
            return GenerationRecord(phash, self.config.model_name, text,
                                    temperature=self.config.temperature)

        key = phash if attempt == 0 else f"{phash}-retry{attempt}"
        if self.cache is not None:
            hit = self.cache.lookup(self.config.model_name, key)
            if hit is not None:
                with self._lock:
                    self.cache_hits += 1
                return hit
        record = self._request(batch.prompt_text, phash)
        if self.cache is not None:
            self.cache.store(record, key)
        return record

    def _http(self) -> httpx.Client:
        with self._lock:
            if self._client is None:
                self._client = httpx.Client(timeout=self.config.timeout, transport=self._transport)
            return self._client

    def _request(self, prompt_text: str, phash: str) -> GenerationRecord:
        api_key = os.environ.get(self.config.api_key_env)
        if not api_key:
            raise ConfigurationError(f"environment variable {self.config.api_key_env} is not set")
        url = self.config.endpoint_url.rstrip("/") + "/chat/completions"
        with self._lock:
            self.network_calls += 1
        start = time.perf_counter()
        try:
            resp = self._http().post(
                url,
                json=build_request(prompt_text, self.config),
                headers={"Authorization": f"Bearer {api_key}"},
            )
        except httpx.TimeoutException as exc:
            raise GenerationError(f"request timed out: {exc}", retryable=True) from exc
        except httpx.HTTPError as exc:
            raise GenerationError(f"request failed: {exc}", retryable=True) from exc
        latency = time.perf_counter() - start
        if not resp.is_success:
            raise GenerationError(f"HTTP {resp.status_code} from {url}", retryable=True, status=resp.status_code)
        try:
            payload = resp.json()
        except ValueError as exc:
            raise GenerationError("response body is not JSON", retryable=False) from exc
        content, usage = parse_response(payload)
        return GenerationRecord(phash, self.config.model_name, content, latency, usage, self.config.temperature)


def _resample(batch, seed: int) -> str:
    # unigram bag over the example bodies, sampled with replacement
    bags = [[w for w in body.split() if SEPARATOR not in w] for body in batch.examples]
    bag = [w for b in bags for w in b]
    if not bag:
        return ""
    length = max(1, int(round(sum(len(b) for b in bags) / len(bags))))
    rng = np.random.Generator(np.random.PCG64(seed))
    docs = []
    for _ in range(batch.requested_count):
        idx = rng.integers(0, len(bag), size=length)
        docs.append(" ".join(bag[i] for i in idx))
    return SEPARATOR.join(docs)

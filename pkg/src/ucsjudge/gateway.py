"""Chat-completion access with deterministic defaults, a disk cache and offline backends."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .errors import ConfigurationError, FixtureMissingError, GatewayError

log = logging.getLogger(__name__)

API_KEY_ENV = "UCSJUDGE_API_KEY"
DEFAULT_MAX_TOKENS = 2048
BACKOFF_SECONDS = (1.0, 2.0, 4.0)


@dataclass(frozen=True)
class CompletionRequest:
    system_prompt: str
    user_prompt: str
    model_id: str = "mock"
    temperature: float = 0.0
    top_p: float = 1.0
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        if not self.system_prompt or not self.user_prompt:
            raise ValueError("prompts must be non-empty")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be positive, got {self.max_tokens}")

    def canonical(self) -> dict:
        return {
            "model_id": self.model_id,
            "system_prompt": self.system_prompt,
            "user_prompt": self.user_prompt,
            "temperature": float(self.temperature),
            "top_p": float(self.top_p),
            "max_tokens": int(self.max_tokens),
        }


@dataclass(frozen=True)
class CompletionResult:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cache_hit: bool = False
    backend: str = "mock"
    truncated: bool = False
    warning: str | None = None


def cache_key(request: CompletionRequest) -> str:
    """SHA-256 hex digest of the request's canonical JSON form."""
    payload = json.dumps(request.canonical(), sort_keys=True, ensure_ascii=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _rough_tokens(text: str) -> int:
    return len(text.split())


class DiskCache:
    """``<root>/<digest[:2]>/<digest>.txt`` with a ``.meta`` JSON sidecar."""

    def __init__(self, root):
        self.root = Path(root)

    def _paths(self, digest):
        d = self.root / digest[:2]
        return d / f"{digest}.txt", d / f"{digest}.meta"

    def get(self, digest: str) -> str | None:
        text_path, _ = self._paths(digest)
        try:
            return text_path.read_bytes().decode("utf-8")
        except FileNotFoundError:
            return None

    def put(self, digest: str, text: str, request: CompletionRequest, meta: dict | None = None) -> None:
        text_path, meta_path = self._paths(digest)
        text_path.parent.mkdir(parents=True, exist_ok=True)
        info = dict(request.canonical())
        info.update(meta or {})
        _atomic_write(text_path, text.encode("utf-8"))
        _atomic_write(meta_path, json.dumps(info, sort_keys=True, indent=1).encode("utf-8"))

    def __contains__(self, digest):
        return self._paths(digest)[0].exists()


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Backend:
    name = "remote"

    def complete(self, request: CompletionRequest) -> CompletionResult:
        raise NotImplementedError


class MockBackend(Backend):
    """Deterministic offline backend driven by a plan ``request -> str``."""

    name = "mock"

    def __init__(self, plan: Callable[[CompletionRequest], str]):
        if not callable(plan):
            raise ConfigurationError("mock plan must be callable")
        self.plan = plan

    def complete(self, request):
        text = self.plan(request)
        if not isinstance(text, str):
            raise ConfigurationError(f"mock plan returned {type(text).__name__}, expected str")
        return CompletionResult(
            text=text,
            prompt_tokens=_rough_tokens(request.system_prompt) + _rough_tokens(request.user_prompt),
            completion_tokens=_rough_tokens(text),
            backend=self.name,
        )


def mock_backend(plan) -> MockBackend:
    return MockBackend(plan)


class ReplayBackend(Backend):
    """Serves completions from a fixture cache directory only; never touches the network."""

    name = "replay"

    def __init__(self, fixture_dir):
        self.cache = DiskCache(fixture_dir)

    def complete(self, request):
        digest = cache_key(request)
        text = self.cache.get(digest)
        if text is None:
            raise FixtureMissingError(f"no replay fixture for request {digest}")
        return CompletionResult(text=text, backend=self.name, cache_hit=True)


class RemoteBackend(Backend):
    """OpenAI-style ``/chat/completions`` endpoint over HTTP.

    Transport errors and 5xx responses are retried with exponential backoff;
    4xx responses fail immediately.
    """

    name = "remote"

    def __init__(self, endpoint: str, api_key: str | None = None, timeout: float = 120.0,
                 retries: int = 3, backoff=BACKOFF_SECONDS, client: httpx.Client | None = None,
                 sleep=time.sleep):
        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.retries = retries
        self.backoff = tuple(backoff)
        self.client = client or httpx.Client(timeout=timeout)
        self.sleep = sleep

    def _payload(self, request):
        return {
            "model": request.model_id,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_tokens,
        }

    def complete(self, request):
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        attempts = 0
        last = None
        while True:
            attempts += 1
            try:
                resp = self.client.post(self.endpoint, json=self._payload(request), headers=headers)
            except httpx.TransportError as exc:
                last = f"transport error: {exc}"
            else:
                if resp.status_code < 400:
                    return self._parse(resp)
                if resp.status_code < 500:
                    raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:200]}", attempts=attempts)
                last = f"HTTP {resp.status_code}"
            if attempts > self.retries:
                raise GatewayError(f"request failed: {last}", attempts=attempts)
            delay = self.backoff[min(attempts - 1, len(self.backoff) - 1)]
            log.warning("completion attempt %d failed (%s); retrying in %.1fs", attempts, last, delay)
            self.sleep(delay)

    def _parse(self, resp):
        try:
            body = resp.json()
            choice = body["choices"][0]
            text = choice["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed completion body: {exc}", attempts=1) from exc
        usage = body.get("usage") or {}
        truncated = choice.get("finish_reason") == "length"
        warning = None
        if truncated:
            warning = "completion truncated at max_tokens"
        elif not text:
            warning = "empty completion"
        return CompletionResult(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            backend=self.name,
            truncated=truncated,
            warning=warning,
        )


@dataclass
class GatewayStats:
    requests: int = 0
    backend_calls: int = 0
    cache_hits: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, hit: bool):
        with self.lock:
            self.requests += 1
            if hit:
                self.cache_hits += 1
            else:
                self.backend_calls += 1


class Gateway:
    """Cache-fronted access to one backend with a bound on in-flight calls."""

    def __init__(self, backend: Backend, cache_dir=None, model_id: str = "mock",
                 concurrency: int = 8, max_tokens: int = DEFAULT_MAX_TOKENS,
                 temperature: float = 0.0, top_p: float = 1.0):
        if concurrency < 1:
            raise ConfigurationError("concurrency must be >= 1")
        self.backend = backend
        self.cache = DiskCache(cache_dir) if cache_dir is not None else None
        self.model_id = model_id
        self.concurrency = concurrency
        self.max_tokens = max_tokens
        self.temperature = temperature
        self.top_p = top_p
        self.stats = GatewayStats()
        self._slots = threading.BoundedSemaphore(concurrency)

    def request(self, system_prompt: str, user_prompt: str) -> CompletionRequest:
        return CompletionRequest(
            system_prompt=system_prompt,
            user_prompt=user_prompt,
            model_id=self.model_id,
            temperature=self.temperature,
            top_p=self.top_p,
            max_tokens=self.max_tokens,
        )

    def complete(self, request: CompletionRequest) -> CompletionResult:
        digest = cache_key(request)
        if self.cache is not None:
            text = self.cache.get(digest)
            if text is not None:
                self.stats.record(hit=True)
                return CompletionResult(
                    text=text, cache_hit=True, backend=self.backend.name,
                    completion_tokens=_rough_tokens(text),
                )
        with self._slots:
            result = self.backend.complete(request)
        self.stats.record(hit=result.cache_hit)
        if result.truncated:
            log.warning("truncated completion for %s", digest[:12])
        if self.cache is not None and not result.truncated:
            self.cache.put(digest, result.text, request, {"backend": result.backend})
        return result

    def ask(self, system_prompt: str, user_prompt: str) -> CompletionResult:
        return self.complete(self.request(system_prompt, user_prompt))

    def complete_many(self, requests: Sequence[CompletionRequest]) -> list[CompletionResult]:
        """Complete requests concurrently; results keep the input order."""
        if self.concurrency == 1 or len(requests) <= 1:
            return [self.complete(r) for r in requests]
        with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
            return list(pool.map(self.complete, requests))

"""Chat-completion client with retry, rate limiting, and a mock backend.

The gateway owns cross-cutting request policy (bounded concurrency, a
sliding-window requests-per-minute limit, exponential backoff with
jitter); backends own the wire format. ``HttpChatBackend`` speaks the
common chat-completions JSON shape; ``MockBackend`` replays scripted
responses keyed by prompt hash for offline, deterministic runs.

The API credential is read from an environment variable only. Config
files carry the variable's name at most, never the secret itself.
"""

from __future__ import annotations

import hashlib
import os
import random
import threading
import time
from collections import deque
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field

from .errors import (
    GatewayConfigurationError,
    GatewayError,
    RequestError,
    RetriesExhaustedError,
)
from .prompts import PromptSpec

DEFAULT_API_KEY_ENV = "QASYNTH_API_KEY"

# request starts per sliding window
RATE_WINDOW_SECONDS = 60.0


@dataclass(frozen=True)
class GenerationParams:
    model_id: str
    temperature: float = 1.0
    max_output_tokens: int = 1024
    timeout: float = 60.0
    seed: int | None = None

    def __post_init__(self):
        if not self.model_id:
            raise GatewayConfigurationError("model_id must be non-empty")
        if self.temperature < 0:
            raise GatewayConfigurationError("temperature must be >= 0")
        if self.max_output_tokens < 1:
            raise GatewayConfigurationError("max_output_tokens must be >= 1")
        if self.timeout <= 0:
            raise GatewayConfigurationError("timeout must be positive")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    prompt_tokens: int
    completion_tokens: int
    latency: float
    attempt_count: int

    def __post_init__(self):
        if self.attempt_count < 1:
            raise GatewayError("attempt_count must be >= 1")
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise GatewayError("token counts must be >= 0")


class TransientBackendError(GatewayError):
    """A retryable failure: HTTP 408/429/5xx or a transport timeout."""

    def __init__(self, message: str, status_code: int | None = None):
        super().__init__(message)
        self.status_code = status_code


_RETRYABLE_STATUS = frozenset({408, 429}) | frozenset(range(500, 600))


def prompt_digest(prompt_text: str) -> str:
    return hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()


class HttpChatBackend:
    """Single-attempt client for a chat-completions HTTP endpoint."""

    def __init__(
        self,
        base_url: str,
        api_key_env: str = DEFAULT_API_KEY_ENV,
    ):
        if not base_url:
            raise GatewayConfigurationError("base_url must be configured")
        api_key = os.environ.get(api_key_env, "")
        if not api_key:
            raise GatewayConfigurationError(
                f"credential environment variable {api_key_env} is not set"
            )
        self._base_url = base_url.rstrip("/")
        self._api_key = api_key
        self._client = None

    def _http(self):
        import httpx

        if self._client is None:
            self._client = httpx.Client(
                headers={"Authorization": f"Bearer {self._api_key}"},
            )
        return self._client

    def complete(
        self, messages: Sequence[tuple[str, str]], params: GenerationParams
    ) -> tuple[str, int, int]:
        import httpx

        body = {
            "model": params.model_id,
            "messages": [{"role": role, "content": content} for role, content in messages],
            "temperature": params.temperature,
            "max_tokens": params.max_output_tokens,
        }
        if params.seed is not None:
            body["seed"] = params.seed
        try:
            response = self._http().post(
                f"{self._base_url}/chat/completions", json=body, timeout=params.timeout
            )
        except httpx.TimeoutException as exc:
            raise TransientBackendError(f"request timed out: {exc}") from exc
        except httpx.TransportError as exc:
            raise TransientBackendError(f"transport failure: {exc}") from exc

        if response.status_code in _RETRYABLE_STATUS:
            raise TransientBackendError(
                f"HTTP {response.status_code}", status_code=response.status_code
            )
        if response.status_code >= 400:
            raise RequestError(response.status_code, response.text[:200])

        payload = response.json()
        try:
            text = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed completion payload: {exc}") from exc
        usage = payload.get("usage", {})
        return (
            text,
            int(usage.get("prompt_tokens", 0)),
            int(usage.get("completion_tokens", 0)),
        )

    def close(self):
        if self._client is not None:
            self._client.close()


@dataclass
class MockRule:
    """One scripted behavior: optional failures first, then a response."""

    response: str
    failures: tuple[int, ...] = ()
    prompt_tokens: int | None = None
    completion_tokens: int | None = None
    _remaining_failures: list[int] = field(init=False, repr=False)

    def __post_init__(self):
        self._remaining_failures = list(self.failures)


def _deterministic_tokens(text: str) -> int:
    return max(1, len(text) // 4)


class MockBackend:
    """Deterministic scripted backend for offline tests and dry runs.

    Rules are matched in order: exact prompt hash, then first matching
    substring rule in registration order, then the default. Token counts
    are derived from text lengths so repeated runs agree byte-for-byte.
    """

    def __init__(self, default: MockRule | None = None):
        self._by_digest: dict[str, MockRule] = {}
        self._contains: list[tuple[str, MockRule]] = []
        self._default = default
        self._lock = threading.Lock()
        self.calls: list[str] = []
        self.in_flight = 0
        self.peak_in_flight = 0

    def script_exact(self, prompt_text: str, rule: MockRule):
        self._by_digest[prompt_digest(prompt_text)] = rule

    def script_digest(self, digest: str, rule: MockRule):
        self._by_digest[digest] = rule

    def script_contains(self, substring: str, rule: MockRule):
        self._contains.append((substring, rule))

    def set_default(self, rule: MockRule):
        self._default = rule

    def _match(self, prompt_text: str) -> MockRule:
        rule = self._by_digest.get(prompt_digest(prompt_text))
        if rule is not None:
            return rule
        for substring, rule in self._contains:
            if substring in prompt_text:
                return rule
        if self._default is not None:
            return self._default
        raise RequestError(404, "no scripted response for prompt")

    def complete(
        self, messages: Sequence[tuple[str, str]], params: GenerationParams
    ) -> tuple[str, int, int]:
        prompt_text = "\n".join(content for _, content in messages)
        with self._lock:
            self.calls.append(prompt_text)
            self.in_flight += 1
            self.peak_in_flight = max(self.peak_in_flight, self.in_flight)
            rule = self._match(prompt_text)
            failure = None
            if rule._remaining_failures:
                failure = rule._remaining_failures.pop(0)
        try:
            if failure is not None:
                if failure in _RETRYABLE_STATUS:
                    raise TransientBackendError(f"HTTP {failure}", status_code=failure)
                raise RequestError(failure, "scripted failure")
            prompt_tokens = (
                rule.prompt_tokens
                if rule.prompt_tokens is not None
                else _deterministic_tokens(prompt_text)
            )
            completion_tokens = (
                rule.completion_tokens
                if rule.completion_tokens is not None
                else _deterministic_tokens(rule.response)
            )
            return rule.response, prompt_tokens, completion_tokens
        finally:
            with self._lock:
                self.in_flight -= 1


@dataclass(frozen=True)
class UsageRecord:
    model_id: str
    prompt_tokens: int
    completion_tokens: int


class ChatGateway:
    """Retrying, rate-limited front door to a chat backend."""

    def __init__(
        self,
        backend,
        max_attempts: int = 3,
        rpm: int | None = None,
        max_in_flight: int | None = None,
        backoff_base: float = 0.5,
        backoff_cap: float = 30.0,
        jitter: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
        rng: random.Random | None = None,
    ):
        if max_attempts < 1:
            raise GatewayConfigurationError("max_attempts must be >= 1")
        if rpm is not None and rpm < 1:
            raise GatewayConfigurationError("rpm must be >= 1")
        if max_in_flight is not None and max_in_flight < 1:
            raise GatewayConfigurationError("max_in_flight must be >= 1")
        self._backend = backend
        self._max_attempts = max_attempts
        self._rpm = rpm
        self._backoff_base = backoff_base
        self._backoff_cap = backoff_cap
        self._jitter = jitter
        self._sleep = sleep
        self._clock = clock
        self._rng = rng if rng is not None else random.Random()
        self._semaphore = (
            threading.Semaphore(max_in_flight) if max_in_flight is not None else None
        )
        self._rate_lock = threading.Lock()
        self._starts: deque[float] = deque()
        self._usage_lock = threading.Lock()
        self.usage: list[UsageRecord] = []

    def _admit(self):
        """Block until one more request start fits in the rpm window."""
        if self._rpm is None:
            return
        with self._rate_lock:
            while True:
                now = self._clock()
                while self._starts and now - self._starts[0] >= RATE_WINDOW_SECONDS:
                    self._starts.popleft()
                if len(self._starts) < self._rpm:
                    self._starts.append(now)
                    return
                self._sleep(max(RATE_WINDOW_SECONDS - (now - self._starts[0]), 0.0))

    def _backoff_delay(self, attempt: int) -> float:
        delay = min(self._backoff_cap, self._backoff_base * (2.0 ** (attempt - 1)))
        return delay * (1.0 + self._rng.random() * self._jitter)

    def chat_complete(self, prompt: PromptSpec, params: GenerationParams) -> CompletionResult:
        if self._semaphore is not None:
            self._semaphore.acquire()
        try:
            return self._attempt_loop(prompt, params)
        finally:
            if self._semaphore is not None:
                self._semaphore.release()

    def _attempt_loop(self, prompt: PromptSpec, params: GenerationParams) -> CompletionResult:
        started = self._clock()
        last_cause: Exception | None = None
        for attempt in range(1, self._max_attempts + 1):
            self._admit()
            try:
                text, prompt_tokens, completion_tokens = self._backend.complete(
                    prompt.messages, params
                )
            except TransientBackendError as exc:
                last_cause = exc
                if attempt == self._max_attempts:
                    break
                self._sleep(self._backoff_delay(attempt))
                continue
            with self._usage_lock:
                self.usage.append(UsageRecord(params.model_id, prompt_tokens, completion_tokens))
            return CompletionResult(
                text=text,
                prompt_tokens=prompt_tokens,
                completion_tokens=completion_tokens,
                latency=self._clock() - started,
                attempt_count=attempt,
            )
        raise RetriesExhaustedError(self._max_attempts, last_cause)


def estimate_cost(
    usage: Iterable[UsageRecord],
    price_table: dict[str, tuple[float, float]],
) -> float:
    """Total cost of logged calls given per-1K-token (input, output) prices."""
    total = 0.0
    for record in usage:
        if record.model_id not in price_table:
            raise GatewayConfigurationError(f"no prices configured for model {record.model_id!r}")
        in_price, out_price = price_table[record.model_id]
        total += (
            record.prompt_tokens / 1000.0 * in_price
            + record.completion_tokens / 1000.0 * out_price
        )
    return total

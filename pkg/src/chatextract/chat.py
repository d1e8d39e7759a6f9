"""Multi-turn conversations against interchangeable chat backends.

Three backends answer prompts:

``live``
    POSTs the message history to an HTTP chat-completion endpoint, with
    retries, exponential backoff and a sliding-window rate limit.
``replay``
    answers solely from a transcript store; a missing entry is a
    :class:`ReplayMiss`, never a fall-through to the network.
``gold_oracle``
    fabricates the reply a perfectly cooperative model would give from the
    sample's gold annotation (see :mod:`chatextract.oracle`).

Transcript keys hash the *full* history because Stage II questions lean on
earlier turns for context.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import logging
import os
import random
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator, Protocol

import httpx

from .errors import (
    ConfigError,
    EmptyReply,
    NetworkForbidden,
    RateLimited,
    ReplayMiss,
    TransportError,
)

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")
BACKEND_KINDS = ("live", "replay", "gold_oracle")
DEFAULT_API_KEY_ENV = "CHATEXTRACT_API_KEY"


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role != "system" and not self.content:
            raise ValueError(f"{self.role} message must have content")


@dataclass
class Conversation:
    id: str
    messages: list[ChatMessage] = field(default_factory=list)

    def append(self, role: str, content: str) -> None:
        expected = "assistant" if self.messages and self.messages[-1].role == "user" else "user"
        if role != expected and not (role == "system" and not self.messages):
            raise ValueError(f"conversation {self.id}: expected a {expected} message, got {role}")
        self.messages.append(ChatMessage(role, content))

    def history(self) -> list[dict[str, str]]:
        return [{"role": m.role, "content": m.content} for m in self.messages]

    @property
    def user_turns(self) -> int:
        return sum(1 for m in self.messages if m.role == "user")


def transcript_key(fingerprint: str, messages: list[dict[str, str]]) -> str:
    """Stable content hash: SHA-256 over compact, key-sorted UTF-8 JSON."""
    doc = {"fingerprint": fingerprint, "messages": messages}
    blob = json.dumps(doc, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class BackendConfig:
    kind: str
    endpoint: str | None = None
    model_name: str | None = None
    request_timeout: float = 60.0
    max_retries: int = 3
    rate_limit: float | None = None  # requests per minute
    transcript_path: str | None = None
    temperature: float = 0.0
    api_key_env: str = DEFAULT_API_KEY_ENV

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ConfigError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.kind == "live" and not (self.endpoint and self.model_name):
            raise ConfigError("live backend needs both an endpoint and a model name")
        if self.kind == "replay" and not self.transcript_path:
            raise ConfigError("replay backend needs a transcript path")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.rate_limit is not None and self.rate_limit <= 0:
            raise ConfigError("rate_limit must be positive")

    def fingerprint(self) -> str:
        """Identity of the *model behaviour*, not of the transport.

        Endpoint URLs, timeouts and retry budgets are excluded so a store
        recorded through one gateway replays through any other.
        """
        return f"{self.model_name}|temperature={self.temperature:g}"

    def to_dict(self) -> dict:
        return asdict(self)


# --- clocks ------------------------------------------------------------------

class Clock(Protocol):
    def monotonic(self) -> float: ...

    def sleep(self, seconds: float) -> None: ...


class SystemClock:
    def monotonic(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class FakeClock:
    """Deterministic clock for tests: ``sleep`` advances time instantly."""

    def __init__(self, start: float = 0.0):
        self.now = start
        self.slept: list[float] = []
        self._lock = threading.Lock()

    def monotonic(self) -> float:
        with self._lock:
            return self.now

    def sleep(self, seconds: float) -> None:
        with self._lock:
            self.slept.append(seconds)
            if seconds > 0:
                self.now += seconds

    def advance(self, seconds: float) -> None:
        with self._lock:
            self.now += seconds


_EPS = 1e-9


class RateLimiter:
    """Sliding-window limiter: at most ``per_minute`` grants in any window of
    ``window`` seconds. Shared by all workers of a live backend."""

    def __init__(self, per_minute: float, clock: Clock | None = None, window: float = 60.0):
        self.limit = int(per_minute)
        if self.limit < 1:
            raise ConfigError("rate limit must allow at least one request per window")
        self.window = window
        self.clock = clock or SystemClock()
        self._grants: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        with self._lock:
            while True:
                now = self.clock.monotonic()
                # the tolerance absorbs float rounding in now + (deadline - now),
                # which could otherwise leave the oldest grant alive forever
                while self._grants and self._grants[0] + self.window <= now + _EPS:
                    self._grants.popleft()
                if len(self._grants) < self.limit:
                    self._grants.append(now)
                    return now
                self.clock.sleep(self._grants[0] + self.window - now)


# --- transcript store --------------------------------------------------------

class TranscriptStore:
    """Append-only JSON-lines store of ``(key, reply)`` records.

    Readers see an in-memory index; writes go through one lock so lines are
    never interleaved.
    """

    def __init__(self, path: str | Path | None = None, *, create: bool = False):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path is not None:
            if self.path.exists():
                self._load()
            elif not create:
                raise ConfigError(f"transcript store {self.path} does not exist")

    def _load(self) -> None:
        with self.path.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                    key = entry["key"]
                except (json.JSONDecodeError, KeyError) as exc:
                    raise ConfigError(f"{self.path}:{line_no}: bad transcript record ({exc})") from exc
                self._entries[key] = entry

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> dict | None:
        return self._entries.get(key)

    def fingerprints(self) -> set[str]:
        return {e.get("fingerprint") for e in self._entries.values()}

    def append(self, fingerprint: str, messages: list[dict[str, str]], reply: str) -> dict:
        key = transcript_key(fingerprint, messages)
        entry = {
            "key": key,
            "fingerprint": fingerprint,
            "messages": messages,
            "reply": reply,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        with self._lock:
            if key in self._entries:
                return self._entries[key]
            self._entries[key] = entry
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
        return entry


# --- backends ----------------------------------------------------------------

_forbid_network = False


@contextlib.contextmanager
def forbid_network() -> Iterator[None]:
    """Within this block any live request raises :class:`NetworkForbidden`.

    Process-wide on purpose: batch workers run on other threads.
    """
    global _forbid_network
    previous, _forbid_network = _forbid_network, True
    try:
        yield
    finally:
        _forbid_network = previous


class Backend(Protocol):
    fingerprint: str

    def complete(self, conversation: Conversation, prompt) -> str: ...


class LiveBackend:
    """OpenAI-style chat-completion client.

    Wire format: ``POST {endpoint}`` with JSON ``{"model", "messages",
    "temperature"}``; the reply is ``choices[0].message.content``. The
    bearer token is read from the environment variable named in the config
    and is never written anywhere.
    """

    def __init__(
        self,
        config: BackendConfig,
        clock: Clock | None = None,
        transport: httpx.BaseTransport | None = None,
        limiter: RateLimiter | None = None,
        rng: random.Random | None = None,
    ):
        if config.kind != "live":
            raise ConfigError("LiveBackend needs a live config")
        self.config = config
        self.fingerprint = config.fingerprint()
        self.clock = clock or SystemClock()
        self.limiter = limiter or (RateLimiter(config.rate_limit, self.clock) if config.rate_limit else None)
        self._rng = rng or random.Random()
        self._client = httpx.Client(transport=transport, timeout=config.request_timeout)
        self.request_count = 0
        self._count_lock = threading.Lock()

    def bind(self, sample) -> "LiveBackend":
        return self

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.api_key_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _backoff(self, attempt: int) -> None:
        base = 2.0 ** attempt
        self.clock.sleep(base + self._rng.uniform(0, base))

    def _post(self, payload: dict) -> httpx.Response:
        if _forbid_network:
            raise NetworkForbidden("network access is forbidden in replay mode")
        if self.limiter is not None:
            self.limiter.acquire()
        with self._count_lock:
            self.request_count += 1
        return self._client.post(self.config.endpoint, json=payload, headers=self._headers())

    def complete(self, conversation: Conversation, prompt=None) -> str:
        payload = {
            "model": self.config.model_name,
            "messages": conversation.history(),
            "temperature": self.config.temperature,
        }
        last: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._backoff(attempt - 1)
            try:
                resp = self._post(payload)
            except httpx.HTTPError as exc:
                last = TransportError(f"{type(exc).__name__}: {exc}")
                logger.warning("chat request failed (%s), attempt %d", exc, attempt + 1)
                continue
            if resp.status_code == 429:
                last = RateLimited(f"endpoint returned 429 after {attempt + 1} attempt(s)")
                continue
            if resp.status_code >= 500:
                last = TransportError(f"endpoint returned HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise TransportError(f"endpoint returned HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"unexpected reply document: {exc}") from exc
        assert last is not None
        raise last

    def close(self) -> None:
        self._client.close()


class RecordingBackend:
    """Wraps a live backend and persists every exchange."""

    def __init__(self, inner: LiveBackend, store: TranscriptStore):
        self.inner = inner
        self.store = store
        self.fingerprint = inner.fingerprint

    def bind(self, sample) -> "RecordingBackend":
        return self

    def complete(self, conversation: Conversation, prompt=None) -> str:
        reply = self.inner.complete(conversation, prompt)
        if reply.strip():
            self.store.append(self.fingerprint, conversation.history(), reply)
        return reply

    @property
    def request_count(self) -> int:
        return self.inner.request_count


class ReplayBackend:
    def __init__(self, store: TranscriptStore, fingerprint: str | None = None):
        if fingerprint is None:
            prints = store.fingerprints()
            if len(prints) > 1:
                raise ConfigError(
                    f"transcript store holds {len(prints)} model fingerprints; name the model to replay"
                )
            fingerprint = next(iter(prints), "")
        self.store = store
        self.fingerprint = fingerprint
        self.request_count = 0

    def bind(self, sample) -> "ReplayBackend":
        return self

    def key_for(self, conversation: Conversation) -> str:
        return transcript_key(self.fingerprint, conversation.history())

    def complete(self, conversation: Conversation, prompt=None) -> str:
        key = self.key_for(conversation)
        entry = self.store.get(key)
        if entry is None:
            raise ReplayMiss(f"no transcript entry for conversation {conversation.id} turn "
                             f"{conversation.user_turns} (key {key[:12]})")
        return entry["reply"]


class GoldOracleBackend:
    """Answers every question from the gold annotation of the bound sample."""

    fingerprint = "gold-oracle"

    def __init__(self, schema):
        self.schema = schema
        self.request_count = 0

    def bind(self, sample) -> "_BoundOracle":
        if sample.gold is None:
            raise ConfigError(f"sample {sample.id} has no gold annotation for the oracle")
        return _BoundOracle(self.schema, sample.gold)


class _BoundOracle:
    fingerprint = "gold-oracle"

    def __init__(self, schema, gold):
        self.schema = schema
        self.gold = gold

    def complete(self, conversation: Conversation, prompt) -> str:
        from .oracle import gold_oracle_reply

        return gold_oracle_reply(conversation, prompt, self.gold, self.schema)


def make_backend(
    config: BackendConfig,
    schema=None,
    *,
    clock: Clock | None = None,
    transport: httpx.BaseTransport | None = None,
    record_to: str | Path | None = None,
):
    if config.kind == "gold_oracle":
        if schema is None:
            raise ConfigError("the gold oracle needs the task schema")
        return GoldOracleBackend(schema)
    if config.kind == "replay":
        store = TranscriptStore(config.transcript_path)
        fp = config.fingerprint() if config.model_name else None
        return ReplayBackend(store, fp)
    live = LiveBackend(config, clock=clock, transport=transport)
    if record_to is not None:
        return RecordingBackend(live, TranscriptStore(record_to, create=True))
    return live


def ask(conversation: Conversation, prompt, backend) -> str:
    """Send ``prompt`` as the next user turn and return the reply verbatim.

    ``backend`` is a bound backend (see ``make_backend(...).bind(sample)``).
    An empty reply is retried once, then raised as :class:`EmptyReply`. On
    any failure the conversation is left as it was before the call.
    """
    conversation.append("user", prompt.text)
    try:
        reply = backend.complete(conversation, prompt)
        if not reply.strip():
            reply = backend.complete(conversation, prompt)
            if not reply.strip():
                raise EmptyReply(f"empty reply in conversation {conversation.id}")
    except BaseException:
        conversation.messages.pop()
        raise
    conversation.append("assistant", reply)
    return reply

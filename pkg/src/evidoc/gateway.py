"""Chat-style model access: request shaping, retries, concurrency limits.

Two model classes exist: ``ORDINARY`` (instruct-type) and ``REASONING``
(thinking-type).  A :class:`Gateway` maps each class to a backend; the same
backend object may serve both.  Backends only need a ``backend_id`` and a
``send(request) -> str`` method.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import mimetypes
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence

import httpx

from .errors import BackendError, ConfigurationError, TransportError

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.1
DEFAULT_MAX_OUTPUT = 2048
DEFAULT_RETRIES = 2


class ModelClass(str, Enum):
    ORDINARY = "ordinary"
    REASONING = "reasoning"


@dataclass(frozen=True)
class ChatRequest:
    model_class: ModelClass
    text_parts: tuple[str, ...]
    image_parts: tuple[str, ...] = ()
    temperature: float = DEFAULT_TEMPERATURE
    max_output: int = DEFAULT_MAX_OUTPUT

    def __post_init__(self) -> None:
        object.__setattr__(self, "model_class", ModelClass(self.model_class))
        object.__setattr__(self, "text_parts", tuple(self.text_parts))
        object.__setattr__(self, "image_parts", tuple(self.image_parts))
        if not self.text_parts:
            raise ValueError("ChatRequest needs at least one text part")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.max_output < 1:
            raise ValueError(f"max_output must be positive, got {self.max_output}")

    @property
    def text(self) -> str:
        return "\n\n".join(self.text_parts)

    def fingerprint(self) -> str:
        """Stable hash of what the model sees (class, text, images)."""
        payload = json.dumps(
            [self.model_class.value, list(self.text_parts), list(self.image_parts)],
            ensure_ascii=False, separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatResponse:
    text: str
    backend_id: str
    latency_ms: int = 0


class Backend(Protocol):
    backend_id: str

    def send(self, request: ChatRequest) -> str: ...


class Gateway:
    """Routes requests to per-class backends with bounded retries.

    Concurrency is capped per backend object, so an aliased reasoning class
    shares the ordinary backend's limit.
    """

    def __init__(
        self,
        backends: Mapping[ModelClass, Backend],
        *,
        retries: int = DEFAULT_RETRIES,
        backoff_base: float = 0.5,
        concurrency: int = 4,
        temperature: float = DEFAULT_TEMPERATURE,
        max_output: int = DEFAULT_MAX_OUTPUT,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if retries < 0:
            raise ConfigurationError("retries must be >= 0")
        if concurrency < 1:
            raise ConfigurationError("concurrency must be >= 1")
        self.backends = {ModelClass(k): v for k, v in backends.items()}
        self.retries = retries
        self.backoff_base = backoff_base
        self.concurrency = concurrency
        self.temperature = temperature
        self.max_output = max_output
        self._sleep = sleep
        self._limits: dict[int, threading.BoundedSemaphore] = {}
        for backend in self.backends.values():
            self._limits.setdefault(id(backend), threading.BoundedSemaphore(concurrency))

    def request(self, model_class: ModelClass, text_parts: Sequence[str],
                image_parts: Sequence[str] = ()) -> ChatRequest:
        return ChatRequest(model_class, tuple(text_parts), tuple(image_parts),
                           temperature=self.temperature, max_output=self.max_output)

    def backend_for(self, model_class: ModelClass) -> Backend:
        try:
            return self.backends[ModelClass(model_class)]
        except KeyError:
            raise ConfigurationError(f"no backend configured for model class {ModelClass(model_class).value!r}") from None

    def complete(self, request: ChatRequest) -> ChatResponse:
        backend = self.backend_for(request.model_class)
        attempts: list[str] = []
        with self._limits[id(backend)]:
            for attempt in range(self.retries + 1):
                if attempt:
                    self._sleep(self.backoff_base * (2 ** (attempt - 1)))
                start = time.perf_counter()
                try:
                    text = backend.send(request)
                except TransportError as exc:
                    attempts.append(f"attempt {attempt + 1}: {exc}")
                    logger.warning("backend %s attempt %d failed: %s", backend.backend_id, attempt + 1, exc)
                    continue
                except BackendError as exc:
                    attempts.append(f"attempt {attempt + 1}: {exc}")
                    raise BackendError(f"backend {backend.backend_id} rejected request: {exc}", attempts) from exc
                latency = int(round((time.perf_counter() - start) * 1000))
                return ChatResponse(text=text, backend_id=backend.backend_id, latency_ms=latency)
        raise BackendError(
            f"backend {backend.backend_id} failed after {len(attempts)} attempts", attempts
        )


# -- HTTP backend ----------------------------------------------------------

_RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


def image_part(ref: str, image_root: Path | None) -> dict[str, Any]:
    """Encode one page image reference as a chat-completions content part."""
    if ref.startswith(("http://", "https://", "data:")):
        url = ref
    else:
        path = Path(ref)
        if image_root is not None and not path.is_absolute():
            path = image_root / path
        mime = mimetypes.guess_type(path.name)[0] or "image/png"
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise BackendError(f"cannot read page image {path}: {exc}") from exc
        url = f"data:{mime};base64,{base64.b64encode(data).decode('ascii')}"
    return {"type": "image_url", "image_url": {"url": url}}


@dataclass
class HTTPBackend:
    """OpenAI-compatible ``/chat/completions`` client."""

    endpoint: str
    model: str
    api_key_env: str | None = None
    image_root: Path | None = None
    timeout: float = 120.0
    client: httpx.Client | None = None
    backend_id: str = ""

    def __post_init__(self) -> None:
        if not self.backend_id:
            self.backend_id = f"http:{self.model}"
        if self.client is None:
            self.client = httpx.Client(timeout=self.timeout)

    @property
    def url(self) -> str:
        base = self.endpoint.rstrip("/")
        return base if base.endswith("/chat/completions") else base + "/chat/completions"

    def payload(self, request: ChatRequest) -> dict[str, Any]:
        content: list[dict[str, Any]] = [image_part(ref, self.image_root) for ref in request.image_parts]
        content.extend({"type": "text", "text": t} for t in request.text_parts)
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        }

    def send(self, request: ChatRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if not key:
                raise BackendError(f"environment variable {self.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = self.client.post(self.url, json=self.payload(request), headers=headers)
        except httpx.TransportError as exc:
            raise TransportError(f"{type(exc).__name__}: {exc}") from exc
        if resp.status_code in _RETRYABLE_STATUS:
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            message = resp.json()["choices"][0]["message"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed completion payload: {resp.text[:200]}") from exc
        content = message.get("content") or ""
        if isinstance(content, list):
            content = "".join(p.get("text", "") for p in content if isinstance(p, dict))
        return content


# -- scripted mock -----------------------------------------------------------

@dataclass
class MockRule:
    response: str
    contains: tuple[str, ...] = ()
    images: tuple[str, ...] = ()
    model_class: ModelClass | None = None

    def matches(self, request: ChatRequest) -> bool:
        if self.model_class is not None and request.model_class != self.model_class:
            return False
        text = request.text
        if not all(s in text for s in self.contains):
            return False
        return all(any(s in ref for ref in request.image_parts) for s in self.images)


@dataclass
class MockBackend:
    """Deterministic scripted backend.

    Lookup order: exact request fingerprint, then the first matching rule,
    then the next unused entry of ``sequence`` (ordinal position), then
    ``default``.  Every request is captured in ``requests``.
    """

    fingerprints: dict[str, str] = field(default_factory=dict)
    rules: list[MockRule] = field(default_factory=list)
    sequence: list[str] = field(default_factory=list)
    default: str | None = None
    backend_id: str = "mock"
    requests: list[ChatRequest] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._lock = threading.Lock()
        self._cursor = 0

    @classmethod
    def from_script(cls, script: Mapping[str, Any]) -> "MockBackend":
        unknown = set(script) - {"fingerprints", "rules", "sequence", "default", "backend_id"}
        if unknown:
            raise ConfigurationError(f"unknown mock script keys: {sorted(unknown)}")
        rules = []
        for i, r in enumerate(script.get("rules", [])):
            extra = set(r) - {"response", "contains", "images", "model_class"}
            if extra or "response" not in r:
                raise ConfigurationError(f"mock rule {i}: needs 'response', unknown keys {sorted(extra)}")
            mc = r.get("model_class")
            rules.append(MockRule(
                response=r["response"],
                contains=tuple(_as_list(r.get("contains", ()))),
                images=tuple(_as_list(r.get("images", ()))),
                model_class=ModelClass(mc) if mc else None,
            ))
        return cls(
            fingerprints=dict(script.get("fingerprints", {})),
            rules=rules,
            sequence=list(script.get("sequence", [])),
            default=script.get("default"),
            backend_id=script.get("backend_id", "mock"),
        )

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "MockBackend":
        with open(path, encoding="utf-8") as fh:
            return cls.from_script(json.load(fh))

    def send(self, request: ChatRequest) -> str:
        with self._lock:
            self.requests.append(request)
            fp = request.fingerprint()
            if fp in self.fingerprints:
                return self.fingerprints[fp]
            for rule in self.rules:
                if rule.matches(request):
                    return rule.response
            if self._cursor < len(self.sequence):
                self._cursor += 1
                return self.sequence[self._cursor - 1]
            if self.default is not None:
                return self.default
        raise BackendError(f"mock script has no response for request {fp[:12]}")


def _as_list(value: Any) -> list[str]:
    return [value] if isinstance(value, str) else list(value)

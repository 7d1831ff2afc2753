"""Text-generation and embedding backends.

Two interchangeable implementations: ``RemoteBackend`` speaks a
chat-completions style HTTP API for live runs, and ``ScriptedBackend`` replays
authored responses and produces hash-derived embeddings, which makes whole
episodes deterministic and byte-replayable in tests. Every prompt built
anywhere in the system goes through one of these; nothing else touches the
network.
"""

from __future__ import annotations

import hashlib
import math
import os
import threading
from dataclasses import dataclass, field

import requests

from .errors import BackendError, ScriptExhaustedError, ValidationError
from .kb import EmbeddingVector

DEFAULT_CREDENTIAL_ENV = "SOPFLOW_API_KEY"
DEFAULT_EMBED_DIM = 64

ROLES = ("system", "user", "assistant", "tool")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValidationError(f"unknown chat role: {self.role!r}")
        if self.role in ("system", "user") and not self.content.strip():
            raise ValidationError(f"{self.role} message content must be non-empty")


@dataclass
class ScriptEntry:
    """One authored response. ``match_key`` is a substring tested against the
    rendered prompt; ``"*"`` matches anything. Entries are tried in declaration
    order and a consumed ``consume_once`` entry never fires again."""

    match_key: str
    response: str
    consume_once: bool = False


@dataclass
class BackendConfig:
    backend_kind: str = "scripted"  # "scripted" | "remote"
    endpoint: str = ""
    model: str = ""
    temperature: float = 0.0
    max_tokens: int = 1024
    credential_env: str = DEFAULT_CREDENTIAL_ENV
    embed_dim: int = DEFAULT_EMBED_DIM
    embed_seed: int = 0
    script: list[ScriptEntry] = field(default_factory=list)
    # exact-text embedding overrides for retrieval-ordering tests
    embed_overrides: dict[str, tuple[float, ...]] = field(default_factory=dict)

    def validate(self) -> None:
        if self.backend_kind not in ("scripted", "remote"):
            raise ValidationError(f"unknown backend kind: {self.backend_kind!r}")
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValidationError("max_tokens must be positive")
        if self.embed_dim <= 0:
            raise ValidationError("embed_dim must be positive")
        if self.backend_kind == "remote" and not self.endpoint:
            raise ValidationError("remote backend requires an endpoint")


def render_prompt(messages: list[ChatMessage]) -> str:
    """Flatten a message list into the text the scripted backend matches against."""
    return "\n".join(m.content for m in messages)


def hash_embedding(text: str, dim: int = DEFAULT_EMBED_DIM, seed: int = 0) -> EmbeddingVector:
    """Deterministic unit-norm embedding derived from SHA-256 of the text.

    Stable across platforms and Python versions, which is what retrieval
    golden tests need; carries no semantic signal beyond exact-text identity.
    """
    if not text:
        raise ValidationError("cannot embed empty text")
    raw = []
    for i in range(dim):
        digest = hashlib.sha256(f"{seed}:{i}:{text}".encode("utf-8")).digest()
        u = int.from_bytes(digest[:8], "big")
        raw.append(u / 2.0**63 - 1.0)
    norm = math.sqrt(sum(v * v for v in raw))
    if norm == 0.0:  # unreachable in practice, keep the vector valid anyway
        raw[0] = 1.0
        norm = 1.0
    return EmbeddingVector.of(v / norm for v in raw)


class ScriptedBackend:
    """Replays authored responses; a pure function of (script, prompt history)."""

    def __init__(self, config: BackendConfig):
        config.validate()
        self.config = config
        self._entries: list[list] = [[entry, False] for entry in config.script]
        self._lock = threading.Lock()

    @property
    def embed_dim(self) -> int:
        return self.config.embed_dim

    @property
    def backend_id(self) -> str:
        return f"scripted:{self.config.embed_seed}:{self.config.embed_dim}"

    def complete(self, messages: list[ChatMessage]) -> str:
        if not messages:
            raise ValidationError("messages must be non-empty")
        prompt = render_prompt(messages)
        with self._lock:
            for slot in self._entries:
                entry, consumed = slot
                if consumed:
                    continue
                if entry.match_key == "*" or entry.match_key in prompt:
                    if entry.consume_once:
                        slot[1] = True
                    return entry.response
        raise ScriptExhaustedError(
            f"no script entry matches prompt starting with {prompt[:80]!r}"
        )

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValidationError("cannot embed empty text")
        override = self.config.embed_overrides.get(text)
        if override is not None:
            return EmbeddingVector.of(override)
        return hash_embedding(text, self.config.embed_dim, self.config.embed_seed)


class RemoteBackend:
    """Thin client for a chat-completions compatible HTTP endpoint."""

    def __init__(self, config: BackendConfig, timeout_s: float = 30.0):
        config.validate()
        self.config = config
        self.timeout_s = timeout_s

    @property
    def embed_dim(self) -> int:
        return self.config.embed_dim

    @property
    def backend_id(self) -> str:
        return f"remote:{self.config.model}"

    def _headers(self) -> dict:
        key = os.environ.get(self.config.credential_env, "")
        if not key:
            raise BackendError(
                f"credential environment variable {self.config.credential_env} is not set"
            )
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def _post(self, path: str, body: dict) -> dict:
        url = self.config.endpoint.rstrip("/") + path
        try:
            response = requests.post(url, json=body, headers=self._headers(),
                                     timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise BackendError(f"transport failure: {exc}") from exc
        if response.status_code != 200:
            retry_after = response.headers.get("Retry-After")
            raise BackendError(
                f"backend returned status {response.status_code}: {response.text[:200]}",
                retry_after_s=float(retry_after) if retry_after else None,
            )
        return response.json()

    def complete(self, messages: list[ChatMessage]) -> str:
        if not messages:
            raise ValidationError("messages must be non-empty")
        body = {
            "model": self.config.model,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        data = self._post("/chat/completions", body)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed completion response: {exc}") from exc

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValidationError("cannot embed empty text")
        data = self._post("/embeddings", {"model": self.config.model, "input": text})
        try:
            return EmbeddingVector.of(data["data"][0]["embedding"])
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed embedding response: {exc}") from exc


def make_backend(config: BackendConfig):
    config.validate()
    if config.backend_kind == "scripted":
        return ScriptedBackend(config)
    return RemoteBackend(config)

"""Knowledge base of diagnostic procedures (SOPs) and historical incidents.

Documents live as one YAML file each under ``<root>/sops`` and
``<root>/incidents`` so engineers can edit them by hand; embeddings are
computed lazily through the configured backend and cached on disk keyed by
(backend id, text hash). Retrieval is an exact linear scan over cosine
similarities, which is plenty at the store sizes this system targets.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from .errors import DegenerateVectorError, DimensionError, NotFoundError, ValidationError

DEFAULT_TOP_K = 3
DEFAULT_THRESHOLD = 0.3

_SOP_DIR = "sops"
_INCIDENT_DIR = "incidents"
_CACHE_FILE = "embedding_cache.json"

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-length real vector produced by an embedding backend."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValidationError("embedding vector must have dim > 0")
        for v in self.values:
            if not math.isfinite(v):
                raise ValidationError("embedding vector contains a non-finite value")

    @property
    def dim(self) -> int:
        return len(self.values)

    @classmethod
    def of(cls, values) -> "EmbeddingVector":
        return cls(tuple(float(v) for v in values))


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a.values, b.values):
        dot += x * y
        na += x * x
        nb += y * y
    if na == 0.0 or nb == 0.0:
        raise DegenerateVectorError("cosine similarity is undefined for a zero vector")
    score = dot / math.sqrt(na * nb)
    return max(-1.0, min(1.0, score))


@dataclass
class SopDoc:
    """A named, ordered diagnostic procedure.

    ``level`` encodes hierarchy depth: 0 is a macro procedure, larger values
    are progressively more specific refinements.
    """

    id: str
    name: str
    steps: list[str]
    level: int = 0
    name_embedding: EmbeddingVector | None = None

    def validate(self, dim: int | None = None) -> None:
        if not self.id or not _ID_RE.match(self.id):
            raise ValidationError(f"invalid SOP id: {self.id!r}")
        if not self.name.strip():
            raise ValidationError("SOP name must be non-empty")
        if not self.steps or any(not s.strip() for s in self.steps):
            raise ValidationError("SOP steps must be a non-empty list of non-empty strings")
        if self.level < 0:
            raise ValidationError("SOP level must be non-negative")
        if dim is not None and self.name_embedding is not None and self.name_embedding.dim != dim:
            raise ValidationError(
                f"SOP embedding dim {self.name_embedding.dim} does not match store dim {dim}"
            )


@dataclass
class HistoricalIncident:
    """A past incident described by what was observed and what caused it."""

    id: str
    manifestation: str
    fault_type: str
    manifestation_embedding: EmbeddingVector | None = None

    def validate(self, dim: int | None = None) -> None:
        if not self.id or not _ID_RE.match(self.id):
            raise ValidationError(f"invalid incident id: {self.id!r}")
        if not self.manifestation.strip():
            raise ValidationError("incident manifestation must be non-empty")
        if (
            dim is not None
            and self.manifestation_embedding is not None
            and self.manifestation_embedding.dim != dim
        ):
            raise ValidationError("incident embedding dim does not match store dim")


@dataclass(frozen=True)
class RetrievalHit:
    """One retrieval result: which item matched and how strongly."""

    item_id: str
    score: float
    kind: str  # "sop" | "incident"

    def __post_init__(self):
        if abs(self.score) > 1.0 + 1e-9:
            raise ValidationError(f"retrieval score out of range: {self.score}")
        if self.kind not in ("sop", "incident"):
            raise ValidationError(f"unknown hit kind: {self.kind}")


def _text_key(backend_id: str, text: str) -> str:
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return f"{backend_id}:{digest}"


class KnowledgeBase:
    """SOP and incident store with embedding-based top-k retrieval.

    Safe for many concurrent readers once loaded; mutations take an internal
    lock. When ``root`` is given, documents and the embedding cache persist
    under it; otherwise the store is memory-only.
    """

    def __init__(self, backend, root: Path | str | None = None,
                 k: int = DEFAULT_TOP_K, threshold: float = DEFAULT_THRESHOLD):
        self._backend = backend
        self._root = Path(root) if root is not None else None
        self.default_k = k
        self.default_threshold = threshold
        self._sops: dict[str, SopDoc] = {}
        self._incidents: dict[str, HistoricalIncident] = {}
        self._cache: dict[str, list[float]] = {}
        self._lock = threading.Lock()
        if self._root is not None:
            self._load()

    @property
    def dim(self) -> int:
        return self._backend.embed_dim

    # -- persistence -------------------------------------------------------

    def _load(self) -> None:
        root = self._root
        assert root is not None
        cache_path = root / _CACHE_FILE
        if cache_path.exists():
            self._cache = json.loads(cache_path.read_text(encoding="utf-8"))
        sop_dir = root / _SOP_DIR
        if sop_dir.is_dir():
            for path in sorted(sop_dir.glob("*.yaml")):
                doc = sop_from_mapping(yaml.safe_load(path.read_text(encoding="utf-8")))
                doc.validate(self.dim)
                self._sops[doc.id] = doc
        inc_dir = root / _INCIDENT_DIR
        if inc_dir.is_dir():
            for path in sorted(inc_dir.glob("*.yaml")):
                inc = incident_from_mapping(yaml.safe_load(path.read_text(encoding="utf-8")))
                inc.validate(self.dim)
                self._incidents[inc.id] = inc

    def _write_doc(self, subdir: str, doc_id: str, mapping: dict) -> None:
        if self._root is None:
            return
        directory = self._root / subdir
        directory.mkdir(parents=True, exist_ok=True)
        text = yaml.safe_dump(mapping, sort_keys=False, allow_unicode=True)
        (directory / f"{doc_id}.yaml").write_text(text, encoding="utf-8")

    def _flush_cache(self) -> None:
        if self._root is None:
            return
        self._root.mkdir(parents=True, exist_ok=True)
        path = self._root / _CACHE_FILE
        path.write_text(json.dumps(self._cache, sort_keys=True), encoding="utf-8")

    # -- mutation ----------------------------------------------------------

    def add_sop(self, doc: SopDoc) -> str:
        doc.validate(self.dim)
        with self._lock:
            if doc.id in self._sops:
                raise ValidationError(f"SOP id already exists: {doc.id}")
            self._sops[doc.id] = doc
            self._write_doc(_SOP_DIR, doc.id, sop_to_mapping(doc))
        return doc.id

    def add_incident(self, inc: HistoricalIncident) -> str:
        inc.validate(self.dim)
        with self._lock:
            if inc.id in self._incidents:
                raise ValidationError(f"incident id already exists: {inc.id}")
            self._incidents[inc.id] = inc
            self._write_doc(_INCIDENT_DIR, inc.id, incident_to_mapping(inc))
        return inc.id

    # -- access ------------------------------------------------------------

    def get_sop(self, sop_id: str) -> SopDoc:
        try:
            return self._sops[sop_id]
        except KeyError:
            raise NotFoundError(f"no SOP with id {sop_id!r}") from None

    def get_incident(self, incident_id: str) -> HistoricalIncident:
        try:
            return self._incidents[incident_id]
        except KeyError:
            raise NotFoundError(f"no incident with id {incident_id!r}") from None

    def list_sops(self) -> list[SopDoc]:
        return list(self._sops.values())

    def list_incidents(self) -> list[HistoricalIncident]:
        return list(self._incidents.values())

    # -- retrieval ---------------------------------------------------------

    def _embed(self, text: str) -> EmbeddingVector:
        key = _text_key(self._backend.backend_id, text)
        cached = self._cache.get(key)
        if cached is not None:
            return EmbeddingVector.of(cached)
        vec = self._backend.embed(text)
        with self._lock:
            self._cache[key] = list(vec.values)
            self._flush_cache()
        return vec

    def match_sop(self, query: str, k: int | None = None,
                  threshold: float | None = None) -> list[tuple[SopDoc, float]]:
        """Top-k SOPs whose name embedding is at least ``threshold`` similar to the query."""
        return self._match(query, self._sops, "name", k, threshold)

    def match_observation(self, observation: str, k: int | None = None,
                          threshold: float | None = None) -> list[tuple[HistoricalIncident, float]]:
        """Top-k historical incidents by manifestation similarity to the observation."""
        return self._match(observation, self._incidents, "manifestation", k, threshold)

    def _match(self, query: str, store: dict, text_attr: str,
               k: int | None, threshold: float | None) -> list:
        if not query.strip():
            raise ValidationError("query must be non-empty")
        k = self.default_k if k is None else int(k)
        threshold = self.default_threshold if threshold is None else float(threshold)
        if k <= 0:
            raise ValidationError("k must be positive")
        if not store:
            return []
        query_vec = self._embed(query)
        scored = []
        for item in store.values():
            vec = item.name_embedding if text_attr == "name" else item.manifestation_embedding
            if vec is None:
                vec = self._embed(getattr(item, text_attr))
                if text_attr == "name":
                    item.name_embedding = vec
                else:
                    item.manifestation_embedding = vec
            scored.append((item, cosine_similarity(query_vec, vec)))
        # ties break on lexicographic id so golden tests stay stable
        scored.sort(key=lambda pair: (-pair[1], pair[0].id))
        return [(item, score) for item, score in scored if score >= threshold][:k]

    def hits(self, matches: list, kind: str) -> list[RetrievalHit]:
        return [RetrievalHit(item_id=item.id, score=score, kind=kind) for item, score in matches]

    # -- lifecycle helpers ---------------------------------------------------

    def clone_in_memory(self) -> "KnowledgeBase":
        """Detached copy used by benchmark runs so generated SOPs never leak back."""
        clone = KnowledgeBase(self._backend, root=None,
                              k=self.default_k, threshold=self.default_threshold)
        clone._sops = {sid: replace(doc, steps=list(doc.steps)) for sid, doc in self._sops.items()}
        clone._incidents = dict(self._incidents)
        clone._cache = dict(self._cache)
        return clone

    def without_sops(self) -> "KnowledgeBase":
        """Copy with an empty SOP store; incidents are kept."""
        clone = self.clone_in_memory()
        clone._sops = {}
        return clone


# -- document file mappings --------------------------------------------------

def sop_to_mapping(doc: SopDoc) -> dict:
    return {"id": doc.id, "name": doc.name, "level": doc.level, "steps": list(doc.steps)}


def sop_from_mapping(mapping: dict) -> SopDoc:
    if not isinstance(mapping, dict):
        raise ValidationError("SOP file must contain a mapping")
    try:
        return SopDoc(
            id=str(mapping["id"]),
            name=str(mapping["name"]),
            steps=[str(s) for s in mapping["steps"]],
            level=int(mapping.get("level", 0)),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed SOP file: {exc}") from None


def incident_to_mapping(inc: HistoricalIncident) -> dict:
    return {"id": inc.id, "manifestation": inc.manifestation, "fault_type": inc.fault_type}


def incident_from_mapping(mapping: dict) -> HistoricalIncident:
    if not isinstance(mapping, dict):
        raise ValidationError("incident file must contain a mapping")
    try:
        return HistoricalIncident(
            id=str(mapping["id"]),
            manifestation=str(mapping["manifestation"]),
            fault_type=str(mapping.get("fault_type", "")),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed incident file: {exc}") from None

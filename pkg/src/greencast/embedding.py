"""Text embedding backends, on-disk caching, and exact nearest-neighbor search.

The local backend hashes character trigrams into a fixed number of buckets,
weights by term frequency, and L2-normalizes. It needs no network or model
download and is fully deterministic, which keeps the whole offline pipeline
byte-reproducible. The remote backend (clients.RemoteEmbedder) plugs in behind
the same embed_batch interface.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import ConfigError, InputError
from .ingest import clean_text

LOCAL_DIM = 1024


class Embedder(Protocol):
    """Anything that turns texts into unit-norm row vectors."""

    backend_id: str
    dim: int

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...


def _stable_bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


class LocalTrigramEmbedder:
    """Hashed character-trigram embedder.

    Trigrams are taken over the cleaned text padded with one space on each
    side, hashed to a bucket with a keyed blake2b digest (stable across
    processes and platforms, unlike the builtin hash), counted, and the
    count vector is L2-normalized.
    """

    def __init__(self, dim: int = LOCAL_DIM):
        if dim < 1:
            raise ConfigError(f"embedding dim must be >= 1, got {dim}")
        self.dim = dim
        self.backend_id = f"local-trigram-{dim}"

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, raw in enumerate(texts):
            text = clean_text(raw)
            if not text:
                raise InputError(f"cannot embed empty text (input {i}: {raw!r})")
            padded = f" {text} "
            for j in range(len(padded) - 2):
                out[i, _stable_bucket(padded[j : j + 3], self.dim)] += 1.0
            norm = np.linalg.norm(out[i])
            out[i] /= norm  # at least one trigram exists, so norm > 0
        return out


class EmbeddingCache:
    """Append-only JSONL cache keyed by (backend, text hash).

    Writes are serialized by a lock and flushed line-at-a-time; a torn final
    line from an interrupted run is skipped on load so readers never see a
    partial vector.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, np.ndarray] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                    vec = np.asarray(row["values"], dtype=np.float64)
                    if vec.shape != (int(row["dim"]),):
                        continue
                    self._entries[row["key"]] = vec
                except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                    continue  # torn or foreign line, ignore

    @staticmethod
    def key_for(backend_id: str, text: str) -> str:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return f"{backend_id}:{digest}"

    def get(self, key: str) -> np.ndarray | None:
        with self._lock:
            vec = self._entries.get(key)
        return None if vec is None else vec.copy()

    def put(self, key: str, vector: np.ndarray) -> None:
        vector = np.asarray(vector, dtype=np.float64)
        line = json.dumps(
            {"key": key, "dim": vector.shape[0], "values": vector.tolist()},
            sort_keys=True,
        )
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = vector.copy()
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


class CachedEmbedder:
    """Wrap an embedder with an EmbeddingCache; only misses hit the backend."""

    def __init__(self, inner: Embedder, cache: EmbeddingCache):
        self.inner = inner
        self.cache = cache
        self.backend_id = inner.backend_id
        self.dim = inner.dim

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float64)
        misses: list[int] = []
        keys = [EmbeddingCache.key_for(self.backend_id, t) for t in texts]
        for i, key in enumerate(keys):
            vec = self.cache.get(key)
            if vec is None:
                misses.append(i)
            else:
                out[i] = vec
        if misses:
            fresh = self.inner.embed_batch([texts[i] for i in misses])
            for j, i in enumerate(misses):
                out[i] = fresh[j]
                self.cache.put(keys[i], fresh[j])
        return out


@dataclass
class VectorIndex:
    """Brute-force exact cosine index over (entry_id, vector) pairs."""

    entry_ids: list[int]
    matrix: np.ndarray  # one row per entry
    dim: int

    @classmethod
    def build(cls, pairs: Sequence[tuple[int, np.ndarray]]) -> "VectorIndex":
        if not pairs:
            raise InputError("cannot build an index from zero entries")
        ids = [int(eid) for eid, _ in pairs]
        if len(set(ids)) != len(ids):
            raise InputError("duplicate entry_id in index input")
        mat = np.stack([np.asarray(v, dtype=np.float64) for _, v in pairs])
        if mat.ndim != 2:
            raise InputError("index vectors must be 1-D and equal length")
        norms = np.linalg.norm(mat, axis=1)
        if np.any(norms == 0):
            raise InputError("zero-norm vector in index input")
        return cls(entry_ids=ids, matrix=mat / norms[:, None], dim=mat.shape[1])

    def __len__(self) -> int:
        return len(self.entry_ids)

    def knn(self, query: np.ndarray, k: int) -> list[tuple[int, float]]:
        """Top-k entries by cosine similarity, descending.

        Exact ties order by ascending entry_id. Returns min(k, n) hits.
        """
        if k < 1:
            raise ConfigError(f"k must be >= 1, got {k}")
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.dim,):
            raise InputError(
                f"query dim {query.shape} does not match index dim ({self.dim},)"
            )
        qnorm = np.linalg.norm(query)
        if qnorm == 0:
            raise InputError("cannot search with a zero-norm query")
        scores = self.matrix @ (query / qnorm)
        ranked = sorted(zip(self.entry_ids, scores), key=lambda t: (-t[1], t[0]))
        return [(eid, float(s)) for eid, s in ranked[: min(k, len(ranked))]]

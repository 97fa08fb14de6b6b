"""
Content-addressed on-disk cache for document embeddings.

One JSON file per key under the cache directory. Keys digest the provider
identity, the segmentation/pooling settings, and the full document text.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

from common import run_timestamp
from vectors import EmbeddingError, EmbeddingVector

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class CacheEntry:
    key: str
    vector: EmbeddingVector
    created_at: str

    def to_dict(self) -> dict:
        return {
            'key': self.key,
            'provider_id': self.vector.provider_id,
            'model_id': self.vector.model_id,
            'dim': self.vector.dim,
            'values': list(self.vector.values),
            'created_at': self.created_at,
        }


def cache_key(
    provider_id: str,
    model_id: str,
    text: str,
    *,
    max_units: int,
    unit: str,
    pooling: str,
) -> str:
    """Stable SHA-256 key; identical inputs always map to identical keys."""
    payload = json.dumps(
        [provider_id, model_id, int(max_units), str(unit), str(pooling), text],
        ensure_ascii=False,
        separators=(',', ':'),
    )
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()


class VectorCache:
    """Directory cache tolerating concurrent readers and serialized writers."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()
        self._stats_lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self.writes = 0
        self.corrupt = 0

    def path_for(self, key: str) -> Path:
        return self.root / f'{key}.json'

    def get(self, key: str) -> EmbeddingVector | None:
        """Return the cached vector, or None on a miss or a corrupt entry."""
        path = self.path_for(key)
        if not path.exists():
            self._count('misses')
            return None
        try:
            entry = read_cache_file(path)
        except (OSError, ValueError, KeyError, TypeError) as error:
            LOGGER.warning('Corrupt cache entry %s (%s); recomputing', key, error)
            self._count('corrupt')
            self._count('misses')
            return None
        if entry.key != key:
            LOGGER.warning('Cache entry %s names key %s; recomputing', key, entry.key)
            self._count('corrupt')
            self._count('misses')
            return None
        self._count('hits')
        return entry.vector

    def put(self, key: str, vector: EmbeddingVector) -> CacheEntry:
        entry = CacheEntry(key=key, vector=vector, created_at=run_timestamp())
        payload = json.dumps(entry.to_dict(), separators=(',', ':'))
        with self._write_lock:
            handle = tempfile.NamedTemporaryFile(
                'w', encoding='utf-8', dir=self.root, prefix=f'.{key}.', suffix='.tmp', delete=False
            )
            try:
                with handle:
                    handle.write(payload)
                os.replace(handle.name, self.path_for(key))
            except OSError:
                Path(handle.name).unlink(missing_ok=True)
                raise
            self.writes += 1
        return entry

    def _count(self, name: str) -> None:
        with self._stats_lock:
            setattr(self, name, getattr(self, name) + 1)


def read_cache_file(path: Path) -> CacheEntry:
    with open(path, 'r', encoding='utf-8') as handle:
        payload = json.load(handle)
    if not isinstance(payload, dict):
        raise ValueError('cache file root must be an object')
    try:
        vector = EmbeddingVector(
            values=tuple(float(value) for value in payload['values']),
            dim=int(payload['dim']),
            provider_id=str(payload['provider_id']),
            model_id=str(payload['model_id']),
        )
    except EmbeddingError as error:
        raise ValueError(str(error)) from error
    return CacheEntry(key=str(payload['key']), vector=vector, created_at=str(payload.get('created_at', '')))

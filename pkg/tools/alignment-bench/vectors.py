"""Embedding vectors, pooling, and the offline deterministic embedder."""

from __future__ import annotations

import hashlib
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np


DETERMINISTIC_PROVIDER_ID = 'deterministic'


class EmbeddingError(ValueError):
    """Raised when vectors are malformed or incompatible."""


@dataclass(frozen=True, slots=True)
class EmbeddingVector:
    values: tuple[float, ...]
    dim: int
    provider_id: str
    model_id: str

    def __post_init__(self) -> None:
        if self.dim < 1 or len(self.values) != self.dim:
            raise EmbeddingError(f'vector has {len(self.values)} values but dim={self.dim}.')
        if not all(math.isfinite(value) for value in self.values):
            raise EmbeddingError(f'vector from {self.provider_id}/{self.model_id} has non-finite entries.')

    @classmethod
    def from_array(cls, values: Sequence[float] | np.ndarray, provider_id: str, model_id: str) -> EmbeddingVector:
        array = np.asarray(values, dtype=np.float64).ravel()
        return cls(values=tuple(array.tolist()), dim=int(array.size), provider_id=provider_id, model_id=model_id)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def scaled(self, factor: float) -> EmbeddingVector:
        return EmbeddingVector.from_array(self.as_array() * factor, self.provider_id, self.model_id)


def mean_pool(vectors: Sequence[EmbeddingVector], weights: Sequence[float] | None = None) -> EmbeddingVector:
    """Component-wise mean of segment vectors; unweighted unless weights are given."""
    if not vectors:
        raise EmbeddingError('cannot pool an empty list of vectors.')
    first = vectors[0]
    for vector in vectors[1:]:
        if vector.dim != first.dim:
            raise EmbeddingError(f'cannot pool vectors of dims {first.dim} and {vector.dim}.')
        if (vector.provider_id, vector.model_id) != (first.provider_id, first.model_id):
            raise EmbeddingError('cannot pool vectors from different providers or models.')
    if len(vectors) == 1:
        return first

    matrix = np.vstack([vector.as_array() for vector in vectors])
    if weights is None:
        pooled = matrix.mean(axis=0)
    else:
        if len(weights) != len(vectors):
            raise EmbeddingError('pooling weights must match the number of vectors.')
        pooled = np.average(matrix, axis=0, weights=np.asarray(weights, dtype=np.float64))
    return EmbeddingVector.from_array(pooled, first.provider_id, first.model_id)


def digest_unit_vector(payload: str, dim: int, seed: int) -> np.ndarray:
    """Expand a SHAKE-256 digest of (seed, payload) into a unit vector."""
    stream = hashlib.shake_256(f'{seed}\x1f{payload}'.encode('utf-8')).digest(8 * dim)
    words = np.frombuffer(stream, dtype='<u8')
    # 53 high bits map onto [0, 1) exactly, then onto [-1, 1)
    uniform = (words >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
    vector = uniform * 2.0 - 1.0
    return vector / np.linalg.norm(vector)


def deterministic_embed(
    text: str,
    dim: int,
    seed: int,
    *,
    provider_id: str = DETERMINISTIC_PROVIDER_ID,
    model_id: str = 'hashed-bag-of-words',
) -> EmbeddingVector:
    """
    Offline embedding that is stable across runs and machines.

    Each whitespace token and the whole text contribute one digest-derived
    unit vector; the sum is normalized. Shared vocabulary therefore shows up
    as cosine similarity, while distinct texts still get distinct vectors.
    """
    if dim < 2:
        raise EmbeddingError(f'deterministic embeddings need dim >= 2, got {dim}.')
    total = digest_unit_vector(f'text:{text}', dim, seed)
    for token in text.split():
        total = total + digest_unit_vector(f'token:{token}', dim, seed)
    norm = np.linalg.norm(total)
    if norm == 0.0:
        raise EmbeddingError('deterministic embedding cancelled to the zero vector.')
    return EmbeddingVector.from_array(total / norm, provider_id, model_id)

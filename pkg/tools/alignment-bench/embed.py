"""
Document embedding: segment, embed each segment, mean-pool, cache.

embed_corpus fans out over a thread pool bounded by the provider's
max_parallel_requests and reports every failed resource together.
"""

from __future__ import annotations

import logging
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass

from common import progress_every
from corpus import Corpus
from embed_cache import VectorCache, cache_key
from providers import EmbeddingProvider, ProviderConfig, ProviderError
from segments import segment_text
from vectors import EmbeddingError, EmbeddingVector, mean_pool

LOGGER = logging.getLogger(__name__)


class EmbedCorpusError(RuntimeError):
    """Raised when one or more resources could not be embedded."""

    def __init__(self, provider_label: str, failures: dict[str, str]) -> None:
        self.provider_label = provider_label
        self.failures = failures
        listing = '; '.join(f'{resource_id}: {cause}' for resource_id, cause in failures.items())
        super().__init__(f'{provider_label}: {len(failures)} resource(s) failed: {listing}')


@dataclass(frozen=True, slots=True)
class EmbedSummary:
    provider_label: str
    resources: int
    cache_hits: int
    requests: int
    failures: int

    def line(self) -> str:
        return (
            f'{self.provider_label}: {self.resources} resources embedded, '
            f'{self.cache_hits} cache hits, {self.requests} requests, {self.failures} failures'
        )


def document_key(config: ProviderConfig, text: str) -> str:
    return cache_key(
        config.provider_id,
        config.model_id,
        text,
        max_units=config.max_units,
        unit=str(config.unit),
        pooling=config.pooling,
    )


def embed_document(provider: EmbeddingProvider, text: str, cache: VectorCache | None) -> EmbeddingVector:
    """Embed one document, serving from the cache when possible."""
    config = provider.config
    key = document_key(config, text)
    if cache is not None:
        cached = cache.get(key)
        if cached is not None:
            return cached

    segments = segment_text(text, config.max_units, config.unit)
    vectors = provider.embed_segments([segment.text for segment in segments])
    if len(vectors) != len(segments):
        raise ProviderError(
            config.provider_id,
            f'returned {len(vectors)} vectors for {len(segments)} segments',
        )
    dims = {vector.dim for vector in vectors}
    if len(dims) != 1 or (config.dim is not None and dims != {config.dim}):
        raise ProviderError(config.provider_id, f'returned inconsistent dimensions {sorted(dims)}')

    weights = [segment.unit_count for segment in segments] if config.pooling == 'length_weighted' else None
    document_vector = mean_pool(vectors, weights)
    if cache is not None:
        cache.put(key, document_vector)
    return document_vector


def embed_corpus(
    provider: EmbeddingProvider,
    corpus: Corpus,
    cache: VectorCache | None,
    *,
    report_progress: bool = True,
) -> dict[str, EmbeddingVector]:
    """Embed every resource of a corpus; returns resource_id -> vector in corpus order."""
    config = provider.config
    resources = list(corpus.resources())
    results: dict[str, EmbeddingVector] = {}
    failures: dict[str, str] = {}
    every = progress_every()

    def work(text: str) -> EmbeddingVector:
        return embed_document(provider, text, cache)

    with ThreadPoolExecutor(max_workers=config.max_parallel_requests) as pool:
        futures = {pool.submit(work, resource.transcript): resource.resource_id for resource in resources}
        for done, future in enumerate(as_completed(futures), start=1):
            resource_id = futures[future]
            try:
                results[resource_id] = future.result()
            except (ProviderError, EmbeddingError, ValueError) as error:
                LOGGER.warning('Embedding failed for %s with %s: %s', resource_id, config.label, error)
                failures[resource_id] = str(error)
            if report_progress and (done % every == 0 or done == len(resources)):
                print(f'[embed] {config.label}: {done}/{len(resources)} resources', file=sys.stderr)

    if failures:
        ordered = {resource.resource_id: failures[resource.resource_id] for resource in resources if resource.resource_id in failures}
        raise EmbedCorpusError(config.label, ordered)
    return {resource.resource_id: results[resource.resource_id] for resource in resources}


def lookup_cached_embeddings(
    config: ProviderConfig,
    corpus: Corpus,
    cache: VectorCache,
) -> tuple[dict[str, EmbeddingVector], list[str]]:
    """Read embeddings from the cache only; returns (found, missing resource ids)."""
    found: dict[str, EmbeddingVector] = {}
    missing: list[str] = []
    for resource in corpus.resources():
        vector = cache.get(document_key(config, resource.transcript))
        if vector is None:
            missing.append(resource.resource_id)
        else:
            found[resource.resource_id] = vector
    return found, missing


def summarize_embedding(provider: EmbeddingProvider, cache: VectorCache, resources: int, failures: int) -> EmbedSummary:
    return EmbedSummary(
        provider_label=provider.config.label,
        resources=resources - failures,
        cache_hits=cache.hits,
        requests=provider.request_count,
        failures=failures,
    )

"""
Alignment rankings.

For an accepted reference resource, the remaining resources of a topic are
ordered by descending cosine similarity to the reference; equal scores fall
back to ascending resource_id so every ranking is a total order.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path

import numpy as np

from corpus import Topic
from vectors import EmbeddingVector

BASELINE_REFERENCE = '__baseline__'
BASELINE_MODEL = 'baseline'


class RankingError(ValueError):
    """Raised when a ranking cannot be produced or parsed."""


class RankingSource(StrEnum):
    EMBEDDING_MODEL = 'embedding_model'
    BASELINE = 'baseline'


class ReferenceMode(StrEnum):
    ALL_ACCEPTED = 'all_accepted'
    SINGLE_RANDOM = 'single_random'


@dataclass(frozen=True, slots=True)
class ReferencePolicy:
    mode: ReferenceMode = ReferenceMode.ALL_ACCEPTED
    seed: int = 0


@dataclass(frozen=True, slots=True)
class RankedEntry:
    resource_id: str
    score: float


@dataclass(frozen=True, slots=True)
class RankedList:
    topic_id: str
    reference_id: str
    entries: tuple[RankedEntry, ...]
    ranking_source: RankingSource = RankingSource.EMBEDDING_MODEL
    model_id: str = ''

    def __post_init__(self) -> None:
        ids = [entry.resource_id for entry in self.entries]
        if len(set(ids)) != len(ids):
            raise RankingError(f'topic {self.topic_id}: ranking repeats a resource_id.')
        if self.reference_id in ids:
            raise RankingError(f'topic {self.topic_id}: reference {self.reference_id} appears in its own ranking.')
        for previous, current in zip(self.entries, self.entries[1:]):
            if entry_sort_key(previous) > entry_sort_key(current):
                raise RankingError(
                    f'topic {self.topic_id}: entries out of order at {previous.resource_id}, {current.resource_id}.'
                )

    def resource_ids(self) -> list[str]:
        return [entry.resource_id for entry in self.entries]

    def to_dict(self) -> dict:
        return {
            'topic_id': self.topic_id,
            'reference_id': self.reference_id,
            'ranking_source': str(self.ranking_source),
            'model_id': self.model_id,
            'entries': [{'resource_id': entry.resource_id, 'score': entry.score} for entry in self.entries],
        }


def entry_sort_key(entry: RankedEntry) -> tuple[float, str]:
    return -entry.score, entry.resource_id


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """dot(a, b) / (|a| |b|), clamped to [-1, 1]."""
    if a.dim != b.dim:
        raise RankingError(f'cannot compare vectors of dims {a.dim} and {b.dim}.')
    left = a.as_array()
    right = b.as_array()
    left_norm = float(np.linalg.norm(left))
    right_norm = float(np.linalg.norm(right))
    if left_norm == 0.0 or right_norm == 0.0:
        raise RankingError('cosine similarity is undefined for a zero vector.')
    value = float(np.dot(left, right)) / (left_norm * right_norm)
    return min(1.0, max(-1.0, value))


def rank_by_reference(
    reference_id: str,
    reference: EmbeddingVector,
    candidates: Mapping[str, EmbeddingVector],
    topic_id: str,
    *,
    model_id: str = '',
) -> RankedList:
    if not candidates:
        raise RankingError(f'topic {topic_id}: no candidates to rank against {reference_id}.')
    if reference_id in candidates:
        raise RankingError(f'topic {topic_id}: reference {reference_id} is among the candidates.')
    entries = [
        RankedEntry(resource_id=resource_id, score=cosine_similarity(reference, vector))
        for resource_id, vector in candidates.items()
    ]
    entries.sort(key=entry_sort_key)
    return RankedList(topic_id=topic_id, reference_id=reference_id, entries=tuple(entries), model_id=model_id)


def topic_rng(seed: int, topic_id: str) -> random.Random:
    """Generator seeded per topic so selections do not depend on topic order."""
    digest = hashlib.sha256(f'{seed}\x1f{topic_id}'.encode('utf-8')).digest()
    return random.Random(int.from_bytes(digest[:8], 'big'))


def select_references(topic: Topic, policy: ReferencePolicy) -> list[str]:
    accepted = [resource.resource_id for resource in topic.resources if resource.accepted]
    if not accepted:
        raise RankingError(f'topic {topic.topic_id}: no accepted resource to use as reference.')
    if policy.mode is ReferenceMode.ALL_ACCEPTED:
        return accepted
    return [topic_rng(policy.seed, topic.topic_id).choice(sorted(accepted))]


def require_embeddings(
    topic_id: str,
    resource_ids: Iterable[str],
    embeddings: Mapping[str, EmbeddingVector],
) -> None:
    missing = [resource_id for resource_id in resource_ids if resource_id not in embeddings]
    if missing:
        raise RankingError(f'topic {topic_id}: missing embeddings for {", ".join(missing)}.')


def has_reference_pairs(topic: Topic) -> bool:
    """True when every reference ranking of the topic keeps an accepted-rejected pair."""
    accepted, rejected = topic.collected().label_counts()
    return accepted >= 2 and rejected >= 1


def rank_topic(
    topic: Topic,
    embeddings: Mapping[str, EmbeddingVector],
    policy: ReferencePolicy,
    *,
    model_id: str = '',
) -> list[RankedList]:
    """One ranking per selected reference, each over the topic's other resources."""
    resource_ids = [resource.resource_id for resource in topic.resources]
    require_embeddings(topic.topic_id, resource_ids, embeddings)
    rankings = []
    for reference_id in select_references(topic, policy):
        candidates = {
            resource_id: embeddings[resource_id]
            for resource_id in resource_ids
            if resource_id != reference_id
        }
        rankings.append(
            rank_by_reference(reference_id, embeddings[reference_id], candidates, topic.topic_id, model_id=model_id)
        )
    return rankings


def rank_generated(
    topic: Topic,
    embeddings: Mapping[str, EmbeddingVector],
    policy: ReferencePolicy,
    generation_tag: str,
    *,
    model_id: str = '',
) -> list[RankedList]:
    """Rank a topic's generated resources of one tag against collected accepted references."""
    generated = topic.generated(generation_tag)
    if not generated.resources:
        raise RankingError(f'topic {topic.topic_id}: no generated resources tagged {generation_tag!r}.')
    references = select_references(topic.collected(), policy)
    candidate_ids = [resource.resource_id for resource in generated.resources]
    require_embeddings(topic.topic_id, [*references, *candidate_ids], embeddings)
    candidates = {resource_id: embeddings[resource_id] for resource_id in candidate_ids}
    return [
        rank_by_reference(reference_id, embeddings[reference_id], candidates, topic.topic_id, model_id=model_id)
        for reference_id in references
    ]


def baseline_ranking(topic: Topic) -> RankedList:
    """Order resources by the source platform's rank; scores are the negated rank."""
    seen: dict[int, str] = {}
    for resource in topic.resources:
        rank = resource.baseline_rank
        if rank is None:
            raise RankingError(f'topic {topic.topic_id}: resource {resource.resource_id} has no baseline_rank.')
        if rank in seen:
            raise RankingError(
                f'topic {topic.topic_id}: baseline_rank {rank} shared by {seen[rank]} and {resource.resource_id}.'
            )
        seen[rank] = resource.resource_id
    entries = tuple(RankedEntry(resource_id=seen[rank], score=-float(rank)) for rank in sorted(seen))
    return RankedList(
        topic_id=topic.topic_id,
        reference_id=BASELINE_REFERENCE,
        entries=entries,
        ranking_source=RankingSource.BASELINE,
        model_id=BASELINE_MODEL,
    )


def write_rankings(path: str | Path, rankings: Sequence[RankedList]) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        for ranking in rankings:
            handle.write(json.dumps(ranking.to_dict(), ensure_ascii=False))
            handle.write('\n')


def read_rankings(path: str | Path) -> list[RankedList]:
    input_path = Path(path)
    rankings = []
    with open(input_path, 'r', encoding='utf-8') as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
                rankings.append(
                    RankedList(
                        topic_id=str(payload['topic_id']),
                        reference_id=str(payload['reference_id']),
                        entries=tuple(
                            RankedEntry(resource_id=str(entry['resource_id']), score=float(entry['score']))
                            for entry in payload['entries']
                        ),
                        ranking_source=RankingSource(payload['ranking_source']),
                        model_id=str(payload.get('model_id', '')),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as error:
                raise RankingError(f'{input_path}:{line_number}: invalid ranking record: {error}') from error
    return rankings

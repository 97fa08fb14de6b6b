"""
Synthetic corpora with a planted signal.

Accepted transcripts of a topic draw from a shared topic vocabulary; rejected
transcripts draw from a vocabulary disjoint from it. Baseline ranks are a
seeded shuffle, so the platform order carries no label information.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from corpus import Corpus, Label, LearnerScoreRow, LearnerScoreTable, Origin, ResourceRecord, Topic

DOMAINS = ('Python Programming', 'Statistics', 'Chemistry', 'World History')
GENERATION_TAGS = ('brevity', 'cognitive-impairment')
SYLLABLES = ('ka', 'lo', 'mi', 'ne', 'ru', 'sa', 'ti', 'vo', 'ze', 'pu', 'dre', 'gan')


def pseudo_word(prefix: str, index: int) -> str:
    """Deterministic readable token, unique per (prefix, index)."""
    digits = []
    value = index
    for _ in range(3):
        value, remainder = divmod(value, len(SYLLABLES))
        digits.append(SYLLABLES[remainder])
    return f'{prefix}{"".join(digits)}'


def draw_transcript(rng: np.random.Generator, vocabulary: Sequence[str], length: int) -> str:
    return ' '.join(rng.choice(vocabulary, size=length, replace=True).tolist())


def make_synthetic_corpus(
    *,
    topic_count: int = 20,
    accepted_per_topic: int = 3,
    rejected_per_topic: int = 7,
    generated_per_label: int = 0,
    vocabulary_size: int = 30,
    transcript_length: int = 60,
    seed: int = 0,
) -> Corpus:
    """Build the planted-signal corpus; generated resources are added when generated_per_label > 0."""
    rng = np.random.default_rng(seed)
    topics = []
    for topic_index in range(topic_count):
        topic_id = f'T{topic_index + 1:02d}'
        on_topic = [pseudo_word(f't{topic_index}', i) for i in range(vocabulary_size)]
        off_topic = [pseudo_word(f'x{topic_index}', i) for i in range(vocabulary_size * 4)]

        labels = [Label.ACCEPTED] * accepted_per_topic + [Label.REJECTED] * rejected_per_topic
        ranks = rng.permutation(len(labels)) + 1
        resources = []
        for resource_index, (label, rank) in enumerate(zip(labels, ranks.tolist())):
            vocabulary = on_topic if label is Label.ACCEPTED else off_topic
            resources.append(
                ResourceRecord(
                    resource_id=f'{topic_id}-R{resource_index + 1:02d}',
                    topic_id=topic_id,
                    transcript=draw_transcript(rng, vocabulary, transcript_length),
                    label=label,
                    baseline_rank=int(rank),
                )
            )

        for tag in GENERATION_TAGS if generated_per_label > 0 else ():
            for label in (Label.ACCEPTED, Label.REJECTED):
                vocabulary = on_topic if label is Label.ACCEPTED else off_topic
                for generated_index in range(generated_per_label):
                    resources.append(
                        ResourceRecord(
                            resource_id=f'{topic_id}-{tag}-{label}-{generated_index + 1}',
                            topic_id=topic_id,
                            transcript=draw_transcript(rng, vocabulary, transcript_length // 2),
                            label=label,
                            baseline_rank=None,
                            origin=Origin.GENERATED,
                            generation_tag=tag,
                        )
                    )

        topics.append(
            Topic(
                topic_id=topic_id,
                title=f'Synthetic topic {topic_index + 1}',
                domain=DOMAINS[topic_index % len(DOMAINS)],
                resources=tuple(resources),
            )
        )
    return Corpus(topics=tuple(topics), metadata={'source': 'synthetic', 'seed': str(seed)})


def make_learner_scores(
    *,
    per_group: int = 40,
    group_means: Sequence[float] = (7.0, 6.0, 5.0),
    spread: float = 1.5,
    max_score: int = 10,
    seed: int = 0,
) -> LearnerScoreTable:
    """Integer quiz scores per group; integer rounding produces realistic ties."""
    rng = np.random.default_rng(seed)
    rows = []
    for group, mean in enumerate(group_means, start=1):
        scores = np.clip(np.rint(rng.normal(mean, spread, size=per_group)), 0, max_score)
        for index, score in enumerate(scores.tolist()):
            rows.append(
                LearnerScoreRow(
                    participant_id=f'P{group}{index + 1:03d}',
                    topic_id=f'T{index % 4 + 1:02d}',
                    group=group,
                    score=float(score),
                )
            )
    return LearnerScoreTable(rows=tuple(rows))

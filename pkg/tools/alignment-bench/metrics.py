"""
Ranking quality metrics.

pairwise_accuracy is the fraction of (accepted, rejected) pairs in which the
accepted resource sits strictly higher in the list. Per-topic rows average
over references; model summaries average over topics with sample SD.
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import kendalltau

from corpus import Corpus, Label
from rank import RankedList

DEFAULT_KS = (3, 5)


class MetricError(ValueError):
    """Raised when a ranking cannot be scored."""


@dataclass(frozen=True, slots=True)
class PairwiseAccuracy:
    correct_pairs: int
    pair_count: int

    @property
    def accuracy(self) -> float:
        return self.correct_pairs / self.pair_count


@dataclass(frozen=True, slots=True)
class MetricRow:
    topic_id: str
    model_id: str
    accuracy: float
    precision_at: Mapping[int, float]
    pair_count: int
    reference_count: int
    domain: str = ''


@dataclass(frozen=True, slots=True)
class ModelSummary:
    model_id: str
    mean_accuracy: float
    sd_accuracy: float
    mean_precision_at: Mapping[int, float]
    sd_precision_at: Mapping[int, float]
    topic_count: int


@dataclass(frozen=True, slots=True)
class DomainAggregate:
    domain: str
    model_id: str
    mean_accuracy: float
    topic_count: int = 0


@dataclass(frozen=True, slots=True)
class GeneratedRow:
    generation_tag: str
    domain: str
    generated_count: int
    accepted_count: int
    ranking_accuracy: float
    topic_count: int


@dataclass(frozen=True, slots=True)
class AgreementRow:
    model_id: str
    topic_id: str
    kendall_tau: float


def entry_labels(ranked: RankedList, labels: Mapping[str, Label]) -> list[Label]:
    try:
        return [labels[entry.resource_id] for entry in ranked.entries]
    except KeyError as error:
        raise MetricError(f'topic {ranked.topic_id}: resource {error.args[0]} has no label.') from error


def pairwise_accuracy(ranked: RankedList, labels: Mapping[str, Label]) -> PairwiseAccuracy:
    """Single pass: each rejected entry is beaten by every accepted entry above it."""
    accepted_seen = 0
    correct = 0
    rejected = 0
    for label in entry_labels(ranked, labels):
        if label is Label.ACCEPTED:
            accepted_seen += 1
        else:
            rejected += 1
            correct += accepted_seen
    pairs = accepted_seen * rejected
    if pairs == 0:
        raise MetricError(
            f'topic {ranked.topic_id}: ranking for {ranked.reference_id} has no accepted-rejected pair.'
        )
    return PairwiseAccuracy(correct_pairs=correct, pair_count=pairs)


def precision_at_k(ranked: RankedList, labels: Mapping[str, Label], k: int) -> float:
    if k < 1:
        raise MetricError(f'k must be >= 1, got {k}.')
    top = entry_labels(ranked, labels)[:k]
    return sum(1 for label in top if label is Label.ACCEPTED) / k


def generated_resource_accuracy(ranked: RankedList, labels: Mapping[str, Label]) -> float:
    return pairwise_accuracy(ranked, labels).accuracy


def topic_metrics(
    rankings: Sequence[RankedList],
    labels: Mapping[str, Label],
    *,
    ks: Sequence[int] = DEFAULT_KS,
    domain: str = '',
) -> MetricRow:
    """Unweighted mean over the per-reference rankings of one topic and model."""
    if not rankings:
        raise MetricError('no rankings to score.')
    first = rankings[0]
    for ranking in rankings[1:]:
        if (ranking.topic_id, ranking.model_id) != (first.topic_id, first.model_id):
            raise MetricError('rankings span more than one topic or model.')

    results = [pairwise_accuracy(ranking, labels) for ranking in rankings]
    precision = {
        k: float(np.mean([precision_at_k(ranking, labels, k) for ranking in rankings]))
        for k in ks
    }
    return MetricRow(
        topic_id=first.topic_id,
        model_id=first.model_id,
        accuracy=float(np.mean([result.accuracy for result in results])),
        precision_at=precision,
        pair_count=sum(result.pair_count for result in results),
        reference_count=len(rankings),
        domain=domain,
    )


def mean_and_sd(values: Sequence[float]) -> tuple[float, float]:
    array = np.asarray(values, dtype=np.float64)
    if array.size == 1:
        return float(array[0]), 0.0
    return float(array.mean()), float(array.std(ddof=1))


def summarize_model(rows: Sequence[MetricRow]) -> ModelSummary:
    if not rows:
        raise MetricError('no metric rows to summarize.')
    model_ids = {row.model_id for row in rows}
    if len(model_ids) != 1:
        raise MetricError(f'rows mix models: {", ".join(sorted(model_ids))}.')

    mean_accuracy, sd_accuracy = mean_and_sd([row.accuracy for row in rows])
    mean_precision: dict[int, float] = {}
    sd_precision: dict[int, float] = {}
    for k in rows[0].precision_at:
        mean_precision[k], sd_precision[k] = mean_and_sd([row.precision_at[k] for row in rows])
    return ModelSummary(
        model_id=rows[0].model_id,
        mean_accuracy=mean_accuracy,
        sd_accuracy=sd_accuracy,
        mean_precision_at=mean_precision,
        sd_precision_at=sd_precision,
        topic_count=len(rows),
    )


def summarize_models(rows: Sequence[MetricRow]) -> list[ModelSummary]:
    """One summary per model, best mean accuracy first."""
    by_model: dict[str, list[MetricRow]] = defaultdict(list)
    for row in rows:
        by_model[row.model_id].append(row)
    summaries = [summarize_model(model_rows) for model_rows in by_model.values()]
    return sorted(summaries, key=lambda summary: (-summary.mean_accuracy, summary.model_id))


def aggregate_by_domain(rows: Sequence[MetricRow], corpus: Corpus) -> list[DomainAggregate]:
    domains = {topic.topic_id: topic.domain for topic in corpus.topics}
    grouped: dict[tuple[str, str], list[float]] = defaultdict(list)
    for row in rows:
        if row.topic_id not in domains:
            raise MetricError(f'metric row references unknown topic {row.topic_id}.')
        grouped[(domains[row.topic_id], row.model_id)].append(row.accuracy)
    return [
        DomainAggregate(domain=domain, model_id=model_id, mean_accuracy=float(np.mean(values)), topic_count=len(values))
        for (domain, model_id), values in sorted(grouped.items())
    ]


@dataclass
class GeneratedCell:
    generated: set[str] = field(default_factory=set)
    accepted: set[str] = field(default_factory=set)
    accuracies: list[float] = field(default_factory=list)
    topics: set[str] = field(default_factory=set)


def generated_resource_table(
    rankings: Mapping[tuple[str, str], Sequence[RankedList]],
    labels: Mapping[str, Label],
    corpus: Corpus,
) -> list[GeneratedRow]:
    """
    Build rows keyed by (generation_tag, domain).

    `rankings` maps (topic_id, generation_tag) to that topic's generated-resource
    rankings. Topics whose generated set lacks one of the labels are skipped.
    """
    cells: dict[tuple[str, str], GeneratedCell] = defaultdict(GeneratedCell)
    for (topic_id, tag), topic_rankings in rankings.items():
        domain = corpus.topic(topic_id).domain
        cell = cells[(tag, domain)]
        for ranking in topic_rankings:
            ids = ranking.resource_ids()
            cell.generated.update(ids)
            cell.accepted.update(resource_id for resource_id in ids if labels[resource_id] is Label.ACCEPTED)
            try:
                cell.accuracies.append(generated_resource_accuracy(ranking, labels))
            except MetricError:
                continue
            cell.topics.add(topic_id)

    rows = []
    for (tag, domain), cell in sorted(cells.items()):
        rows.append(
            GeneratedRow(
                generation_tag=tag,
                domain=domain,
                generated_count=len(cell.generated),
                accepted_count=len(cell.accepted),
                ranking_accuracy=float(np.mean(cell.accuracies)) if cell.accuracies else float('nan'),
                topic_count=len(cell.topics),
            )
        )
    return rows


def kendall_tau(order_a: Sequence[str], order_b: Sequence[str]) -> float:
    """Kendall tau over the items common to two total orders."""
    position_b = {item: index for index, item in enumerate(order_b)}
    common = [item for item in order_a if item in position_b]
    if len(common) < 2:
        raise MetricError('kendall tau needs at least two common items.')
    return float(kendalltau(list(range(len(common))), [position_b[item] for item in common]).statistic)

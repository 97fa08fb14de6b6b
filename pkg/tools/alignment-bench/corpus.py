"""
Labeled ground-truth data model for the alignment benchmark.

A corpus is a set of topics, each holding transcripts of educational resources
labeled accepted or rejected by domain experts, with the source platform's
original rank order. Corpora and learner-score tables are read from
line-delimited JSON files.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from enum import StrEnum
from pathlib import Path
from typing import Any, TextIO

from common import sha256_file

CORPUS_KEYS = (
    'topic_id',
    'topic_title',
    'domain',
    'resource_id',
    'transcript',
    'label',
    'baseline_rank',
    'origin',
    'generation_tag',
)
REQUIRED_CORPUS_KEYS = ('topic_id', 'topic_title', 'domain', 'resource_id', 'transcript', 'label', 'origin')
LEARNER_KEYS = ('participant_id', 'topic_id', 'group', 'score')
LEARNER_GROUPS = (1, 2, 3)


class CorpusFormatError(ValueError):
    """Raised when a corpus or learner-score file cannot be parsed."""


class Label(StrEnum):
    ACCEPTED = 'accepted'
    REJECTED = 'rejected'

    @classmethod
    def parse(cls, raw_value: Any) -> Label:
        try:
            return cls(raw_value)
        except ValueError as error:
            raise CorpusFormatError(
                f"label must be 'accepted' or 'rejected', got {raw_value!r}."
            ) from error


class Origin(StrEnum):
    COLLECTED = 'collected'
    GENERATED = 'generated'


@dataclass(frozen=True, slots=True)
class ResourceRecord:
    resource_id: str
    topic_id: str
    transcript: str
    label: Label
    baseline_rank: int | None
    origin: Origin = Origin.COLLECTED
    generation_tag: str | None = None

    @property
    def accepted(self) -> bool:
        return self.label is Label.ACCEPTED


@dataclass(frozen=True, slots=True)
class Topic:
    topic_id: str
    title: str
    domain: str
    resources: tuple[ResourceRecord, ...] = ()

    def labels(self) -> dict[str, Label]:
        return {resource.resource_id: resource.label for resource in self.resources}

    def collected(self) -> Topic:
        """Return this topic restricted to platform-collected resources."""
        return replace(
            self,
            resources=tuple(resource for resource in self.resources if resource.origin is Origin.COLLECTED),
        )

    def generated(self, tag: str | None = None) -> Topic:
        """Return this topic restricted to generated resources, optionally of one tag."""
        return replace(
            self,
            resources=tuple(
                resource
                for resource in self.resources
                if resource.origin is Origin.GENERATED and (tag is None or resource.generation_tag == tag)
            ),
        )

    def label_counts(self) -> tuple[int, int]:
        """Return (accepted, rejected) counts."""
        accepted = sum(1 for resource in self.resources if resource.accepted)
        return accepted, len(self.resources) - accepted


@dataclass(frozen=True, slots=True)
class Corpus:
    topics: tuple[Topic, ...] = ()
    metadata: Mapping[str, str] = field(default_factory=dict, compare=False)

    def topic(self, topic_id: str) -> Topic:
        for topic in self.topics:
            if topic.topic_id == topic_id:
                return topic
        raise KeyError(topic_id)

    def resources(self) -> Iterable[ResourceRecord]:
        for topic in self.topics:
            yield from topic.resources

    def generation_tags(self) -> list[str]:
        tags = {
            resource.generation_tag
            for resource in self.resources()
            if resource.origin is Origin.GENERATED and resource.generation_tag
        }
        return sorted(tags)


@dataclass(frozen=True, slots=True)
class LearnerScoreRow:
    participant_id: str
    topic_id: str
    group: int
    score: float


@dataclass(frozen=True, slots=True)
class LearnerScoreTable:
    rows: tuple[LearnerScoreRow, ...]

    def group_sizes(self) -> dict[int, int]:
        counts = Counter(row.group for row in self.rows)
        return {group: counts[group] for group in LEARNER_GROUPS if counts[group]}

    def groups(self) -> dict[int, list[float]]:
        """Scores per present group, in group order."""
        grouped: dict[int, list[float]] = {}
        for group in LEARNER_GROUPS:
            scores = [row.score for row in self.rows if row.group == group]
            if scores:
                grouped[group] = scores
        return grouped


@dataclass(frozen=True, slots=True)
class ValidationIssue:
    location: str
    message: str


@dataclass(frozen=True, slots=True)
class ValidationReport:
    errors: tuple[ValidationIssue, ...]
    warnings: tuple[ValidationIssue, ...]
    evaluable_topic_count: int

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {
            'ok': self.ok,
            'evaluable_topic_count': self.evaluable_topic_count,
            'errors': [{'location': issue.location, 'message': issue.message} for issue in self.errors],
            'warnings': [{'location': issue.location, 'message': issue.message} for issue in self.warnings],
        }


def load_corpus(path: str | Path) -> Corpus:
    """Load a line-delimited corpus file."""
    input_path = Path(path)
    try:
        with open(input_path, 'r', encoding='utf-8') as handle:
            corpus = read_corpus_handle(handle, locator=str(input_path))
    except OSError as error:
        raise CorpusFormatError(f'{input_path}: cannot read corpus file: {error}') from error
    return replace(corpus, metadata={'source': str(input_path), **corpus.metadata})


def read_corpus_handle(handle: TextIO, *, locator: str = '<corpus>') -> Corpus:
    """Parse corpus records from an open stream, preserving input order."""
    topic_headers: dict[str, tuple[str, str, int]] = {}
    topic_resources: dict[str, list[ResourceRecord]] = {}
    seen_ids: dict[tuple[str, str], int] = {}

    for line_number, line in enumerate(handle, start=1):
        if not line.strip():
            continue
        payload = parse_json_line(line, locator, line_number)
        try:
            record, title, domain = parse_corpus_record(payload)
        except CorpusFormatError as error:
            raise CorpusFormatError(f'{locator}:{line_number}: {error}') from error

        key = (record.topic_id, record.resource_id)
        if key in seen_ids:
            raise CorpusFormatError(
                f'{locator}:{line_number}: duplicate resource_id {record.resource_id!r} in topic '
                f'{record.topic_id!r} (first seen on line {seen_ids[key]}).'
            )
        seen_ids[key] = line_number

        header = topic_headers.setdefault(record.topic_id, (title, domain, line_number))
        if header[:2] != (title, domain):
            raise CorpusFormatError(
                f'{locator}:{line_number}: topic {record.topic_id!r} metadata disagrees with line {header[2]} '
                f'(topic_title/domain must repeat identically).'
            )
        topic_resources.setdefault(record.topic_id, []).append(record)

    topics = tuple(
        Topic(
            topic_id=topic_id,
            title=topic_headers[topic_id][0],
            domain=topic_headers[topic_id][1],
            resources=tuple(resources),
        )
        for topic_id, resources in topic_resources.items()
    )
    return Corpus(topics=topics, metadata={})


def parse_json_line(line: str, locator: str, line_number: int) -> dict:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as error:
        raise CorpusFormatError(f'{locator}:{line_number}: malformed JSON: {error.msg}.') from error
    if not isinstance(payload, dict):
        raise CorpusFormatError(f'{locator}:{line_number}: each line must be a JSON object.')
    return payload


def parse_corpus_record(payload: Mapping[str, Any]) -> tuple[ResourceRecord, str, str]:
    """Convert one raw corpus object into a record plus its topic title and domain."""
    missing = [key for key in REQUIRED_CORPUS_KEYS if key not in payload]
    if missing:
        raise CorpusFormatError(f'missing required field(s): {", ".join(missing)}.')

    for key in ('topic_id', 'topic_title', 'domain', 'resource_id', 'transcript'):
        if not isinstance(payload[key], str):
            raise CorpusFormatError(f'field {key!r} must be a string.')

    label = Label.parse(payload['label'])
    try:
        origin = Origin(payload['origin'])
    except ValueError as error:
        raise CorpusFormatError(
            f"field 'origin' must be 'collected' or 'generated', got {payload['origin']!r}."
        ) from error

    raw_rank = payload.get('baseline_rank')
    if raw_rank is None:
        if origin is Origin.COLLECTED:
            raise CorpusFormatError("missing required field(s): baseline_rank.")
        baseline_rank = None
    elif isinstance(raw_rank, bool) or not isinstance(raw_rank, int):
        raise CorpusFormatError(f'field baseline_rank must be an integer, got {raw_rank!r}.')
    else:
        baseline_rank = raw_rank

    generation_tag = payload.get('generation_tag')
    if generation_tag is not None and not isinstance(generation_tag, str):
        raise CorpusFormatError('field generation_tag must be a string when present.')

    record = ResourceRecord(
        resource_id=payload['resource_id'],
        topic_id=payload['topic_id'],
        transcript=payload['transcript'],
        label=label,
        baseline_rank=baseline_rank,
        origin=origin,
        generation_tag=generation_tag,
    )
    return record, payload['topic_title'], payload['domain']


def corpus_records(corpus: Corpus) -> Iterable[dict]:
    """Yield the line-format objects for a corpus in topic/resource order."""
    for topic in corpus.topics:
        for resource in topic.resources:
            row: dict[str, Any] = {
                'topic_id': topic.topic_id,
                'topic_title': topic.title,
                'domain': topic.domain,
                'resource_id': resource.resource_id,
                'transcript': resource.transcript,
                'label': str(resource.label),
                'baseline_rank': resource.baseline_rank,
                'origin': str(resource.origin),
            }
            if resource.baseline_rank is None:
                del row['baseline_rank']
            if resource.generation_tag is not None:
                row['generation_tag'] = resource.generation_tag
            yield row


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus in the line-delimited record format."""
    output_path = Path(path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, 'w', encoding='utf-8', newline='\n') as handle:
        for row in corpus_records(corpus):
            handle.write(json.dumps(row, ensure_ascii=False))
            handle.write('\n')


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Check every data-model invariant; reports problems, never raises."""
    errors: list[ValidationIssue] = []
    warnings: list[ValidationIssue] = []
    evaluable = 0

    topic_counts = Counter(topic.topic_id for topic in corpus.topics)
    for topic_id, count in sorted(topic_counts.items()):
        if count > 1:
            errors.append(ValidationIssue(f'topic {topic_id}', f'topic_id appears {count} times.'))

    resource_owner: dict[str, str] = {}
    for topic in corpus.topics:
        location = f'topic {topic.topic_id}'
        if not topic.domain.strip():
            errors.append(ValidationIssue(location, 'domain is empty.'))

        ranks: dict[int, str] = {}
        local_ids: set[str] = set()
        for resource in topic.resources:
            resource_location = f'{location} / resource {resource.resource_id}'
            if resource.resource_id in local_ids:
                errors.append(ValidationIssue(resource_location, 'duplicate resource_id within topic.'))
            local_ids.add(resource.resource_id)
            owner = resource_owner.setdefault(resource.resource_id, topic.topic_id)
            if owner != topic.topic_id:
                errors.append(
                    ValidationIssue(resource_location, f'resource_id already used by topic {owner}.')
                )
            if resource.topic_id != topic.topic_id:
                errors.append(
                    ValidationIssue(resource_location, f'record names topic {resource.topic_id!r}.')
                )
            if not resource.transcript.strip():
                errors.append(ValidationIssue(resource_location, 'transcript is empty.'))
            errors.extend(check_origin(resource, resource_location))
            errors.extend(check_baseline_rank(resource, resource_location, ranks))

        accepted, rejected = topic.collected().label_counts()
        if accepted and rejected:
            evaluable += 1
        elif not accepted:
            warnings.append(ValidationIssue(location, 'no accepted resources; excluded from accuracy.'))
        else:
            warnings.append(ValidationIssue(location, 'no rejected resources; excluded from accuracy.'))

    return ValidationReport(errors=tuple(errors), warnings=tuple(warnings), evaluable_topic_count=evaluable)


def check_origin(resource: ResourceRecord, location: str) -> list[ValidationIssue]:
    if resource.origin is Origin.GENERATED and not resource.generation_tag:
        return [ValidationIssue(location, 'generated resource requires generation_tag.')]
    if resource.origin is Origin.COLLECTED and resource.generation_tag is not None:
        return [ValidationIssue(location, 'collected resource must not carry generation_tag.')]
    return []


def check_baseline_rank(
    resource: ResourceRecord,
    location: str,
    ranks: dict[int, str],
) -> list[ValidationIssue]:
    """Validate one rank and record it for the per-topic distinctness check."""
    rank = resource.baseline_rank
    if rank is None:
        if resource.origin is Origin.COLLECTED:
            return [ValidationIssue(location, 'collected resource is missing baseline_rank.')]
        return []
    if rank < 1:
        return [ValidationIssue(location, f'baseline_rank must be >= 1, got {rank}.')]
    if resource.origin is not Origin.COLLECTED:
        return []
    if rank in ranks:
        return [ValidationIssue(location, f'baseline_rank {rank} repeats resource {ranks[rank]}.')]
    ranks[rank] = resource.resource_id
    return []


def filter_evaluable(corpus: Corpus) -> Corpus:
    """Keep topics whose collected resources include both labels."""
    kept = []
    for topic in corpus.topics:
        accepted, rejected = topic.collected().label_counts()
        if accepted and rejected:
            kept.append(topic)
    return replace(corpus, topics=tuple(kept))


def load_learner_scores(path: str | Path) -> LearnerScoreTable:
    """Load a line-delimited learner-score file."""
    input_path = Path(path)
    try:
        with open(input_path, 'r', encoding='utf-8') as handle:
            return read_learner_handle(handle, locator=str(input_path))
    except OSError as error:
        raise CorpusFormatError(f'{input_path}: cannot read learner-score file: {error}') from error


def read_learner_handle(handle: TextIO, *, locator: str = '<scores>') -> LearnerScoreTable:
    rows: list[LearnerScoreRow] = []
    seen: dict[str, int] = {}
    for line_number, line in enumerate(handle, start=1):
        if not line.strip():
            continue
        payload = parse_json_line(line, locator, line_number)
        try:
            row = parse_learner_row(payload)
        except CorpusFormatError as error:
            raise CorpusFormatError(f'{locator}:{line_number}: {error}') from error
        if row.participant_id in seen:
            raise CorpusFormatError(
                f'{locator}:{line_number}: duplicate participant_id {row.participant_id!r} '
                f'(first seen on line {seen[row.participant_id]}).'
            )
        seen[row.participant_id] = line_number
        rows.append(row)

    if not rows:
        raise CorpusFormatError(f'{locator}: no rows.')
    return LearnerScoreTable(rows=tuple(rows))


def parse_learner_row(payload: Mapping[str, Any]) -> LearnerScoreRow:
    missing = [key for key in LEARNER_KEYS if key not in payload]
    if missing:
        raise CorpusFormatError(f'missing required field(s): {", ".join(missing)}.')
    group = payload['group']
    if isinstance(group, bool) or group not in LEARNER_GROUPS:
        raise CorpusFormatError(f'group must be 1, 2 or 3, got {group!r}.')
    score = payload['score']
    if isinstance(score, bool) or not isinstance(score, (int, float)) or not math.isfinite(score):
        raise CorpusFormatError(f'score must be a finite number, got {score!r}.')
    return LearnerScoreRow(
        participant_id=str(payload['participant_id']),
        topic_id=str(payload['topic_id']),
        group=int(group),
        score=float(score),
    )


def corpus_digest(path: str | Path) -> str:
    """SHA-256 of the corpus file bytes, recorded in run manifests."""
    return sha256_file(path)


def write_learner_scores(table: LearnerScoreTable, path: str | Path) -> None:
    output_path = Path(path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, 'w', encoding='utf-8', newline='\n') as handle:
        for row in table.rows:
            payload = {
                'participant_id': row.participant_id,
                'topic_id': row.topic_id,
                'group': row.group,
                'score': row.score,
            }
            handle.write(json.dumps(payload, ensure_ascii=False))
            handle.write('\n')

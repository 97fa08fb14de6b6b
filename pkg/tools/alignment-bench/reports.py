"""
Report emission: metric CSVs, JSON documents, Markdown tables and the run
manifest that heads them.

CSV files are written with the csv module (LF line endings, unquoted headers)
and read back with pyarrow using string column types, so numbers round-trip
through repr without pyarrow's type inference.
"""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from metrics import AgreementRow, DomainAggregate, GeneratedRow, MetricRow, ModelSummary

PER_TOPIC_PREFIX = ['model_id', 'topic_id', 'domain', 'accuracy']
PER_TOPIC_SUFFIX = ['pair_count', 'reference_count']
DOMAIN_HEADER = ['domain', 'model_id', 'mean_accuracy', 'topic_count']
AGREEMENT_HEADER = ['model_id', 'topic_id', 'kendall_tau']
GENERATED_HEADER = [
    'generation_tag',
    'domain',
    'generated_count',
    'accepted_count',
    'ranking_accuracy',
    'topic_count',
]
METHOD_NOTES = (
    'Each reference resource is excluded from its own ranking.',
    'Per-topic accuracy and Precision@k are unweighted means over that topic\'s references.',
    'Precision@k keeps denominator k when a ranking has fewer than k entries.',
    'Standard deviations use the sample (n-1) convention; a single topic reports 0.',
)


class ReportFormatError(ValueError):
    """Raised when a report file cannot be read back."""


def per_topic_header(ks: Sequence[int]) -> list[str]:
    return [*PER_TOPIC_PREFIX, *(f'precision_at_{k}' for k in ks), *PER_TOPIC_SUFFIX]


def summary_header(ks: Sequence[int]) -> list[str]:
    columns = ['model_id', 'mean_accuracy', 'sd_accuracy']
    for k in ks:
        columns.extend([f'mean_p{k}', f'sd_p{k}'])
    columns.append('topic_count')
    return columns


def format_number(value: float | int) -> str:
    if isinstance(value, int):
        return str(value)
    if math.isnan(value):
        return ''
    return repr(float(value))


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(value) if isinstance(value, (int, float)) else value for value in row])


def write_metric_rows(path: str | Path, rows: Sequence[MetricRow], ks: Sequence[int]) -> None:
    write_csv(
        path,
        per_topic_header(ks),
        (
            [
                row.model_id,
                row.topic_id,
                row.domain,
                row.accuracy,
                *(row.precision_at[k] for k in ks),
                row.pair_count,
                row.reference_count,
            ]
            for row in rows
        ),
    )


def write_summaries(path: str | Path, summaries: Sequence[ModelSummary], ks: Sequence[int]) -> None:
    def cells(summary: ModelSummary) -> list:
        values: list = [summary.model_id, summary.mean_accuracy, summary.sd_accuracy]
        for k in ks:
            values.extend([summary.mean_precision_at[k], summary.sd_precision_at[k]])
        values.append(summary.topic_count)
        return values

    write_csv(path, summary_header(ks), (cells(summary) for summary in summaries))


def write_domains(path: str | Path, aggregates: Sequence[DomainAggregate]) -> None:
    write_csv(
        path,
        DOMAIN_HEADER,
        ([row.domain, row.model_id, row.mean_accuracy, row.topic_count] for row in aggregates),
    )


def write_agreement(path: str | Path, rows: Sequence[AgreementRow]) -> None:
    write_csv(path, AGREEMENT_HEADER, ([row.model_id, row.topic_id, row.kendall_tau] for row in rows))


def write_generated(path: str | Path, rows: Sequence[GeneratedRow]) -> None:
    write_csv(
        path,
        GENERATED_HEADER,
        (
            [
                row.generation_tag,
                row.domain,
                row.generated_count,
                row.accepted_count,
                row.ranking_accuracy,
                row.topic_count,
            ]
            for row in rows
        ),
    )


def read_string_table(path: str | Path) -> dict[str, list[str]]:
    """Read a CSV with every column typed as string; returns column -> values."""
    import pyarrow as pa
    import pyarrow.csv as arrow_csv

    input_path = Path(path)
    try:
        with open(input_path, 'rb') as handle:
            header = handle.readline().decode('utf-8').strip().split(',')
        table = arrow_csv.read_csv(
            input_path,
            convert_options=arrow_csv.ConvertOptions(
                column_types={name: pa.string() for name in header},
                strings_can_be_null=False,
            ),
        )
    except (OSError, pa.ArrowInvalid, UnicodeDecodeError) as error:
        raise ReportFormatError(f'{input_path}: cannot read CSV: {error}') from error
    return {name: table.column(name).to_pylist() for name in table.column_names}


def parse_float(value: str, locator: str) -> float:
    try:
        return float(value)
    except ValueError as error:
        raise ReportFormatError(f'{locator}: expected a number, got {value!r}.') from error


def read_metric_rows(path: str | Path) -> list[MetricRow]:
    """Read a per-topic metric CSV back into MetricRow objects."""
    columns = read_string_table(path)
    missing = [name for name in [*PER_TOPIC_PREFIX, *PER_TOPIC_SUFFIX] if name not in columns]
    if missing:
        raise ReportFormatError(f'{path}: missing column(s) {", ".join(missing)}.')
    ks = sorted(int(name.removeprefix('precision_at_')) for name in columns if name.startswith('precision_at_'))

    rows = []
    for index in range(len(columns['model_id'])):
        locator = f'{path}:{index + 2}'
        rows.append(
            MetricRow(
                topic_id=columns['topic_id'][index],
                model_id=columns['model_id'][index],
                domain=columns['domain'][index],
                accuracy=parse_float(columns['accuracy'][index], locator),
                precision_at={k: parse_float(columns[f'precision_at_{k}'][index], locator) for k in ks},
                pair_count=int(parse_float(columns['pair_count'][index], locator)),
                reference_count=int(parse_float(columns['reference_count'][index], locator)),
            )
        )
    return rows


@dataclass(frozen=True)
class AccuracyMatrix:
    values: np.ndarray
    topic_ids: tuple[str, ...]
    model_ids: tuple[str, ...]


def pivot_accuracy(rows: Sequence[MetricRow]) -> tuple[AccuracyMatrix, list[tuple[str, str]]]:
    """Pivot rows to topics x models; returns the matrix and any missing (model, topic) cells."""
    topic_ids = list(dict.fromkeys(row.topic_id for row in rows))
    model_ids = list(dict.fromkeys(row.model_id for row in rows))
    cells = {(row.model_id, row.topic_id): row.accuracy for row in rows}
    gaps = [
        (model_id, topic_id)
        for model_id in model_ids
        for topic_id in topic_ids
        if (model_id, topic_id) not in cells
    ]
    values = np.full((len(topic_ids), len(model_ids)), np.nan)
    for i, topic_id in enumerate(topic_ids):
        for j, model_id in enumerate(model_ids):
            values[i, j] = cells.get((model_id, topic_id), np.nan)
    return AccuracyMatrix(values=values, topic_ids=tuple(topic_ids), model_ids=tuple(model_ids)), gaps


@dataclass(frozen=True)
class RunManifest:
    corpus_path: str
    corpus_digest: str
    providers: tuple[dict, ...]
    policy: str
    seed: int
    tie_correction: Mapping[str, bool]
    ks: tuple[int, ...]
    created_at: str
    tool_version: str
    inputs: Mapping[str, str] = field(default_factory=dict)
    notes: tuple[str, ...] = METHOD_NOTES

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload['providers'] = list(self.providers)
        payload['ks'] = list(self.ks)
        payload['notes'] = list(self.notes)
        payload['tie_correction'] = dict(self.tie_correction)
        payload['inputs'] = dict(self.inputs)
        return payload


def write_json(path: str | Path, payload: Mapping[str, Any]) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(render_json(payload))


def render_json(payload: Mapping[str, Any]) -> str:
    return json.dumps(payload, indent=2, ensure_ascii=False) + '\n'


def markdown_table(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    lines = [
        '| ' + ' | '.join(header) + ' |',
        '| ' + ' | '.join('---' for _ in header) + ' |',
    ]
    lines.extend('| ' + ' | '.join(row) + ' |' for row in rows)
    return '\n'.join(lines)


def mean_sd(mean: float, sd: float) -> str:
    return f'{mean:.2f} ± {sd:.2f}'


def render_manifest_header(manifest: RunManifest) -> str:
    lines = [
        '## Run manifest',
        '',
        f'- tool version: {manifest.tool_version}',
        f'- created at: {manifest.created_at}',
        f'- corpus: {manifest.corpus_path} (sha256 {manifest.corpus_digest})',
        f'- reference policy: {manifest.policy}, seed {manifest.seed}',
        f'- providers: {", ".join(provider["label"] for provider in manifest.providers) or "none"}',
    ]
    for name, enabled in manifest.tie_correction.items():
        lines.append(f'- {name} tie correction: {"on" if enabled else "off"}')
    lines.extend(f'- {note}' for note in manifest.notes)
    return '\n'.join(lines)


def render_evaluation_report(
    manifest: RunManifest,
    summaries: Sequence[ModelSummary],
    domains: Sequence[DomainAggregate],
    generated: Sequence[GeneratedRow],
    ks: Sequence[int],
) -> str:
    sections = ['# Alignment benchmark report', '', render_manifest_header(manifest), '']

    sections.extend([
        '## Ranking accuracy',
        '',
        markdown_table(
            ['Model', 'Accuracy ± SD', 'Topics'],
            ([summary.model_id, mean_sd(summary.mean_accuracy, summary.sd_accuracy), str(summary.topic_count)]
             for summary in summaries),
        ),
        '',
        '## Precision@k',
        '',
        markdown_table(
            ['Model', *(f'Precision@{k}' for k in ks)],
            (
                [summary.model_id, *(mean_sd(summary.mean_precision_at[k], summary.sd_precision_at[k]) for k in ks)]
                for summary in summaries
            ),
        ),
        '',
        '## Accuracy per domain',
        '',
        markdown_table(
            ['Domain', 'Model', 'Mean accuracy', 'Topics'],
            ([row.domain, row.model_id, f'{row.mean_accuracy:.2f}', str(row.topic_count)] for row in domains),
        ),
        '',
    ])
    if generated:
        sections.extend([
            '## Generated resources',
            '',
            markdown_table(
                ['Use case', 'Domain', 'Generated', 'Accepted', 'Ranking accuracy'],
                (
                    [
                        row.generation_tag,
                        row.domain,
                        str(row.generated_count),
                        str(row.accepted_count),
                        'n/a' if math.isnan(row.ranking_accuracy) else f'{row.ranking_accuracy:.2f}',
                    ]
                    for row in generated
                ),
            ),
            '',
        ])
    return '\n'.join(sections)


def format_p_cell(p_value: float) -> str:
    return '< .001' if p_value < 0.001 else f'{p_value:.3f}'


def render_friedman_markdown(stats_document: Mapping[str, Any]) -> str:
    friedman = stats_document['friedman']
    lines = [
        '# Model comparison',
        '',
        markdown_table(
            ['n', 'k', 'chi2', 'df', 'p', "Kendall's W", 'Tie corrected'],
            [[
                str(friedman['n']),
                str(friedman['k']),
                f"{friedman['chi_square']:.2f}",
                str(friedman['df']),
                format_p_cell(friedman['p_value']),
                f"{friedman['kendalls_w']:.2f}",
                'yes' if friedman['tie_corrected'] else 'no',
            ]],
        ),
        '',
        '## Mean ranks',
        '',
        markdown_table(
            ['Model', 'Mean rank'],
            ([label, f'{rank:.3f}'] for label, rank in friedman['mean_ranks'].items()),
        ),
        '',
    ]
    nemenyi_section = stats_document.get('nemenyi')
    if nemenyi_section:
        lines.extend([
            f"## Nemenyi (CD = {nemenyi_section['critical_difference']:.3f}, alpha = {nemenyi_section['alpha']:g})",
            '',
            markdown_table(
                ['Pair', 'Mean rank difference', 'Verdict'],
                (
                    [
                        f"{pair['a']} vs {pair['b']}",
                        f"{pair['mean_rank_difference']:.3f}",
                        'Significant' if pair['significant'] else 'Not Significant',
                    ]
                    for pair in nemenyi_section['pairs']
                ),
            ),
            '',
        ])
    return '\n'.join(lines)


def render_learner_markdown(learner_document: Mapping[str, Any]) -> str:
    kruskal = learner_document['kruskal_wallis']
    dunn = learner_document['dunn']
    lines = [
        '# Learner scores by resource rank',
        '',
        markdown_table(
            ['Group', 'N', 'Mean rank'],
            (
                [label, str(kruskal['group_sizes'][label]), f'{mean_rank:.1f}']
                for label, mean_rank in kruskal['group_mean_ranks'].items()
            ),
        ),
        '',
        f"Kruskal-Wallis: chi2({kruskal['df']}) = {kruskal['h_statistic']:.2f}, p {format_p_cell(kruskal['p_value'])}",
        '',
        f"## Pairwise comparisons (Dunn's test, alpha = {dunn['adjusted_alpha']:.3f})",
        '',
        markdown_table(
            ['Comparison', 'z', 'p', 'p (Bonferroni)', 'Verdict'],
            (
                [
                    f"{row['group_a']} vs {row['group_b']}",
                    f"{row['z']:.3f}",
                    format_p_cell(row['p_unadjusted']),
                    format_p_cell(row['p_bonferroni']),
                    'Significant' if row['significant_at_adjusted_alpha'] else 'Not Significant',
                ]
                for row in dunn['comparisons']
            ),
        ),
        '',
    ]
    return '\n'.join(lines)


def write_text(path: str | Path, text: str) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(text)

#!/usr/bin/env python3
"""
Alignment benchmark command line.

Subcommands:
  validate  check a corpus file against the data model
  embed     embed every resource with each configured provider into the cache
  evaluate  rank, score and write per-topic, summary, domain and report files
  stats     Friedman, Kendall's W and Nemenyi over a per-topic metric CSV
  learner   Kruskal-Wallis and Dunn/Bonferroni over learner scores
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from common import (
    TOOL_VERSION,
    ConfigurationError,
    default_cache_dir,
    default_providers_path,
    default_seed,
    load_env_file,
    resolve_repo_path,
    run_timestamp,
    sha256_file,
)
from corpus import (
    Corpus,
    CorpusFormatError,
    ValidationIssue,
    ValidationReport,
    corpus_digest,
    load_corpus,
    load_learner_scores,
    validate_corpus,
)
from embed import EmbedCorpusError, embed_corpus, lookup_cached_embeddings, summarize_embedding
from embed_cache import VectorCache
from metrics import (
    DEFAULT_KS,
    AgreementRow,
    MetricError,
    MetricRow,
    aggregate_by_domain,
    generated_resource_table,
    kendall_tau,
    summarize_models,
    topic_metrics,
)
from providers import ProviderConfig, ProviderError, build_provider, load_provider_configs
from rank import (
    RankedList,
    RankingError,
    ReferenceMode,
    ReferencePolicy,
    baseline_ranking,
    has_reference_pairs,
    rank_generated,
    rank_topic,
    write_rankings,
)
from reports import (
    ReportFormatError,
    RunManifest,
    pivot_accuracy,
    read_metric_rows,
    render_evaluation_report,
    render_friedman_markdown,
    render_json,
    render_learner_markdown,
    write_agreement,
    write_domains,
    write_generated,
    write_json,
    write_metric_rows,
    write_summaries,
    write_text,
)
from segments import SegmentationError
from stats import (
    NemenyiCoverageError,
    StatsError,
    dunn_test,
    dunn_verdicts,
    friedman_test,
    friedman_verdict,
    kruskal_verdict,
    kruskal_wallis,
    nemenyi,
    nemenyi_verdicts,
)
from vectors import EmbeddingError

LOGGER = logging.getLogger(__name__)

SKIP_DOTENV_ENV = 'ALIGNBENCH_NO_DOTENV'
POLICY_MODES = {'all': ReferenceMode.ALL_ACCEPTED, 'random': ReferenceMode.SINGLE_RANDOM}
BENCH_ERRORS = (
    ConfigurationError,
    CorpusFormatError,
    SegmentationError,
    EmbeddingError,
    ProviderError,
    EmbedCorpusError,
    RankingError,
    MetricError,
    StatsError,
    ReportFormatError,
    OSError,
)


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument('--seed', type=int, default=None, help='Reference-selection seed (default ALIGNBENCH_SEED or 0).')
    shared.add_argument('--json', action='store_true', help='Print machine-readable JSON only.')
    shared.add_argument('--cache-dir', type=Path, default=None, help='Embedding cache directory.')
    shared.add_argument('--providers', type=Path, default=None, help='Provider configuration JSON.')
    shared.add_argument('--policy', choices=sorted(POLICY_MODES), default='all', help='Reference policy.')
    shared.add_argument('--env-file', type=Path, default=None, help='dotenv file holding provider credentials.')
    shared.add_argument('--verbose', action='store_true', help='Enable debug logging.')

    parser = argparse.ArgumentParser(description='Embedding alignment benchmark')
    subparsers = parser.add_subparsers(dest='command', required=True)

    validate = subparsers.add_parser('validate', parents=[shared], help='Validate a corpus file.')
    validate.add_argument('corpus', type=Path)

    embed = subparsers.add_parser('embed', parents=[shared], help='Embed a corpus into the cache.')
    embed.add_argument('corpus', type=Path)

    evaluate = subparsers.add_parser('evaluate', parents=[shared], help='Rank and score cached embeddings.')
    evaluate.add_argument('corpus', type=Path)
    evaluate.add_argument('--output-dir', type=Path, required=True)
    evaluate.add_argument('--k', type=int, action='append', dest='ks', help='Precision@k cutoff (repeatable).')
    evaluate.add_argument(
        '--generated-model',
        default=None,
        help='Provider label used for the generated-resource table (default: first provider).',
    )

    stats = subparsers.add_parser('stats', parents=[shared], help='Friedman/Nemenyi over per-topic metrics.')
    stats.add_argument('per_topic_csv', type=Path)
    add_test_options(stats)

    learner = subparsers.add_parser('learner', parents=[shared], help='Kruskal-Wallis/Dunn over learner scores.')
    learner.add_argument('scores', type=Path)
    add_test_options(learner)
    return parser


def add_test_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--alpha', type=float, default=0.05)
    parser.add_argument('--no-tie-correction', action='store_true')
    parser.add_argument('--output', type=Path, default=None, help='Also write the JSON report here.')
    parser.add_argument('--markdown', type=Path, default=None, help='Write a Markdown table here.')


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s',
    )
    handlers = {
        'validate': cmd_validate,
        'embed': cmd_embed,
        'evaluate': cmd_evaluate,
        'stats': cmd_stats,
        'learner': cmd_learner,
    }
    try:
        if args.env_file is not None:
            load_env_file(args.env_file)
        elif not os.environ.get(SKIP_DOTENV_ENV):
            load_env_file()
        return handlers[args.command](args)
    except BENCH_ERRORS as error:
        print(f'error: {error}', file=sys.stderr)
        return 1


def resolved_seed(args: argparse.Namespace) -> int:
    return args.seed if args.seed is not None else default_seed()


def resolved_cache_dir(args: argparse.Namespace) -> Path:
    return args.cache_dir if args.cache_dir is not None else resolve_repo_path(default_cache_dir())


def resolved_providers(args: argparse.Namespace) -> list[ProviderConfig]:
    path = args.providers if args.providers is not None else resolve_repo_path(default_providers_path())
    return load_provider_configs(path)


def load_valid_corpus(path: Path) -> Corpus:
    corpus = load_corpus(path)
    report = validate_corpus(corpus)
    if not report.ok:
        first = report.errors[0]
        raise CorpusFormatError(
            f'{path}: {len(report.errors)} validation error(s); first: {first.location}: {first.message}'
        )
    return corpus


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        corpus = load_corpus(args.corpus)
    except CorpusFormatError as error:
        if not args.json:
            raise
        report = ValidationReport(
            errors=(ValidationIssue(str(args.corpus), str(error)),),
            warnings=(),
            evaluable_topic_count=0,
        )
        print(render_json(report.to_dict()), end='')
        return 1

    report = validate_corpus(corpus)
    if args.json:
        print(render_json(report.to_dict()), end='')
        return 0 if report.ok else 1

    resource_count = sum(len(topic.resources) for topic in corpus.topics)
    print(
        f'{args.corpus}: {len(corpus.topics)} topics, {resource_count} resources, '
        f'{report.evaluable_topic_count} evaluable'
    )
    for issue in report.errors:
        print(f'error: {issue.location}: {issue.message}')
    for issue in report.warnings:
        print(f'warning: {issue.location}: {issue.message}')
    return 0 if report.ok else 1


def cmd_embed(args: argparse.Namespace) -> int:
    corpus = load_valid_corpus(args.corpus)
    configs = resolved_providers(args)
    providers = [build_provider(config) for config in configs]
    cache_dir = resolved_cache_dir(args)
    resource_count = sum(len(topic.resources) for topic in corpus.topics)

    summaries = []
    failures: list[EmbedCorpusError] = []
    for provider in providers:
        cache = VectorCache(cache_dir)
        failed = 0
        try:
            embed_corpus(provider, corpus, cache)
        except EmbedCorpusError as error:
            failures.append(error)
            failed = len(error.failures)
        finally:
            close = getattr(provider, 'close', None)
            if close is not None:
                close()
        summary = summarize_embedding(provider, cache, resource_count, failed)
        summaries.append(summary)
        if not args.json:
            print(summary.line())

    if args.json:
        print(
            render_json({'providers': [
                {
                    'label': summary.provider_label,
                    'resources': summary.resources,
                    'cache_hits': summary.cache_hits,
                    'requests': summary.requests,
                    'failures': summary.failures,
                }
                for summary in summaries
            ]}),
            end='',
        )
    if failures:
        listing = '; '.join(
            f'{error.provider_label}: {", ".join(error.failures)}' for error in failures
        )
        raise ProviderError('embed', f'failed resources: {listing}')
    return 0


def evaluable_topics(corpus: Corpus) -> Corpus:
    kept = []
    for topic in corpus.topics:
        if has_reference_pairs(topic):
            kept.append(topic)
        else:
            LOGGER.warning(
                'Skipping topic %s: needs at least 2 accepted and 1 rejected collected resources',
                topic.topic_id,
            )
    if not kept:
        raise RankingError('no topic has at least 2 accepted and 1 rejected collected resources.')
    return Corpus(topics=tuple(kept), metadata=corpus.metadata)


def cached_embeddings(configs: Sequence[ProviderConfig], corpus: Corpus, cache_dir: Path) -> dict[str, dict]:
    cache = VectorCache(cache_dir)
    found_by_label = {}
    gaps = []
    for config in configs:
        found, missing = lookup_cached_embeddings(config, corpus, cache)
        if missing:
            preview = ', '.join(missing[:10]) + (' ...' if len(missing) > 10 else '')
            gaps.append(f'{config.label} lacks {len(missing)} embedding(s): {preview}')
        found_by_label[config.label] = found
    if gaps:
        raise RankingError('missing embeddings (run embed first): ' + '; '.join(gaps))
    return found_by_label


def mean_agreement(model_id: str, rankings: Sequence[RankedList], baseline: RankedList) -> AgreementRow:
    baseline_order = baseline.resource_ids()
    taus = [kendall_tau(ranking.resource_ids(), baseline_order) for ranking in rankings]
    return AgreementRow(model_id=model_id, topic_id=baseline.topic_id, kendall_tau=float(np.mean(taus)))


def cmd_evaluate(args: argparse.Namespace) -> int:
    ks = tuple(args.ks) if args.ks else DEFAULT_KS
    if any(k < 1 for k in ks):
        raise MetricError(f'--k values must be >= 1, got {list(ks)}.')
    seed = resolved_seed(args)
    policy = ReferencePolicy(mode=POLICY_MODES[args.policy], seed=seed)
    corpus = load_valid_corpus(args.corpus)
    configs = resolved_providers(args)
    embeddings = cached_embeddings(configs, corpus, resolved_cache_dir(args))
    evaluable = evaluable_topics(corpus)

    rows: list[MetricRow] = []
    agreement: list[AgreementRow] = []
    all_rankings: list[RankedList] = []
    baselines = {}
    for topic in evaluable.topics:
        collected = topic.collected()
        baseline = baseline_ranking(collected)
        baselines[topic.topic_id] = baseline
        all_rankings.append(baseline)
        rows.append(topic_metrics([baseline], collected.labels(), ks=ks, domain=topic.domain))

    for config in configs:
        print(f'[evaluate] {config.label}: ranking {len(evaluable.topics)} topics', file=sys.stderr)
        for topic in evaluable.topics:
            collected = topic.collected()
            rankings = rank_topic(collected, embeddings[config.label], policy, model_id=config.label)
            all_rankings.extend(rankings)
            rows.append(topic_metrics(rankings, collected.labels(), ks=ks, domain=topic.domain))
            agreement.append(mean_agreement(config.label, rankings, baselines[topic.topic_id]))

    generated_rows, generated_rankings = evaluate_generated(args, corpus, configs, embeddings, seed)
    all_rankings.extend(generated_rankings)

    summaries = summarize_models(rows)
    domains = aggregate_by_domain(rows, corpus)
    manifest = RunManifest(
        corpus_path=str(args.corpus),
        corpus_digest=corpus_digest(args.corpus),
        providers=tuple({'label': config.label, **config.to_dict()} for config in configs),
        policy=str(policy.mode),
        seed=seed,
        tie_correction={},
        ks=ks,
        created_at=run_timestamp(),
        tool_version=TOOL_VERSION,
    )

    output_dir = args.output_dir
    output_dir.mkdir(parents=True, exist_ok=True)
    write_metric_rows(output_dir / 'per_topic.csv', rows, ks)
    write_summaries(output_dir / 'summary.csv', summaries, ks)
    write_domains(output_dir / 'domains.csv', domains)
    write_agreement(output_dir / 'agreement.csv', agreement)
    write_rankings(output_dir / 'rankings.jsonl', all_rankings)
    if generated_rows:
        write_generated(output_dir / 'generated.csv', generated_rows)
    write_text(output_dir / 'report.md', render_evaluation_report(manifest, summaries, domains, generated_rows, ks))
    write_json(output_dir / 'run_manifest.json', manifest.to_dict())

    if args.json:
        print(render_json({
            'output_dir': str(output_dir),
            'topics': len(evaluable.topics),
            'summary': [
                {'model_id': summary.model_id, 'mean_accuracy': summary.mean_accuracy, 'sd_accuracy': summary.sd_accuracy}
                for summary in summaries
            ],
        }), end='')
    else:
        for summary in summaries:
            print(
                f'{summary.model_id}: accuracy {summary.mean_accuracy:.3f} ± {summary.sd_accuracy:.3f} '
                f'over {summary.topic_count} topics'
            )
        print(f'[evaluate] wrote reports to {output_dir}', file=sys.stderr)
    return 0


def evaluate_generated(
    args: argparse.Namespace,
    corpus: Corpus,
    configs: Sequence[ProviderConfig],
    embeddings: dict[str, dict],
    seed: int,
) -> tuple[list, list[RankedList]]:
    """Score generated resources against a seeded random accepted reference per topic."""
    tags = corpus.generation_tags()
    if not tags or not configs:
        return [], []
    label = args.generated_model or configs[0].label
    if label not in embeddings:
        raise ConfigurationError(f"--generated-model '{label}' is not a configured provider.")

    policy = ReferencePolicy(mode=ReferenceMode.SINGLE_RANDOM, seed=seed)
    grouped: dict[tuple[str, str], list[RankedList]] = {}
    labels = {}
    for topic in corpus.topics:
        labels.update(topic.labels())
        accepted, _ = topic.collected().label_counts()
        if not accepted:
            continue
        for tag in tags:
            if not topic.generated(tag).resources:
                continue
            grouped[(topic.topic_id, tag)] = rank_generated(
                topic, embeddings[label], policy, tag, model_id=label
            )
    rankings = [ranking for topic_rankings in grouped.values() for ranking in topic_rankings]
    return generated_resource_table(grouped, labels, corpus), rankings


def cmd_stats(args: argparse.Namespace) -> int:
    tie_correction = not args.no_tie_correction
    rows = read_metric_rows(args.per_topic_csv)
    matrix, gaps = pivot_accuracy(rows)
    if gaps:
        listing = ', '.join(f'{model_id}/{topic_id}' for model_id, topic_id in gaps)
        raise StatsError(f'incomplete model x topic matrix; missing cells: {listing}')
    if len(matrix.model_ids) < 2 or len(matrix.topic_ids) < 2:
        raise StatsError(
            f'need at least 2 models and 2 topics, got {len(matrix.model_ids)} and {len(matrix.topic_ids)}.'
        )

    friedman = friedman_test(matrix.values, tie_correction=tie_correction, labels=matrix.model_ids)
    verdicts = [friedman_verdict(friedman, args.alpha)]
    nemenyi_payload = None
    notice = None
    try:
        posthoc = nemenyi(matrix.values, args.alpha, matrix.model_ids)
    except NemenyiCoverageError as error:
        notice = f'Nemenyi skipped: {error}'
        LOGGER.warning('%s', notice)
        verdicts.append(notice)
    else:
        nemenyi_payload = posthoc.to_dict()
        verdicts.extend(nemenyi_verdicts(posthoc))

    document = {
        'manifest': stats_manifest(args, {'friedman': tie_correction}),
        'friedman': friedman.to_dict(),
        'nemenyi': nemenyi_payload,
        'nemenyi_notice': notice,
        'verdicts': verdicts,
    }
    emit_document(args, document, verdicts, render_friedman_markdown)
    return 0


def cmd_learner(args: argparse.Namespace) -> int:
    tie_correction = not args.no_tie_correction
    table = load_learner_scores(args.scores)
    grouped = table.groups()
    if len(grouped) < 2:
        raise StatsError(f'need at least 2 learner groups, got {len(grouped)}.')
    labels = [f'G{group}' for group in grouped]
    samples = list(grouped.values())

    kruskal = kruskal_wallis(samples, tie_correction=tie_correction, labels=labels)
    dunn = dunn_test(samples, args.alpha, tie_correction, labels=labels)
    verdicts = [kruskal_verdict(kruskal, args.alpha), *dunn_verdicts(dunn)]
    document = {
        'manifest': stats_manifest(args, {'kruskal_wallis': tie_correction, 'dunn': tie_correction}),
        'kruskal_wallis': kruskal.to_dict(),
        'dunn': dunn.to_dict(),
        'verdicts': verdicts,
    }
    emit_document(args, document, verdicts, render_learner_markdown)
    return 0


def stats_manifest(args: argparse.Namespace, tie_correction: dict[str, bool]) -> dict:
    input_path = args.per_topic_csv if args.command == 'stats' else args.scores
    return {
        'tool_version': TOOL_VERSION,
        'created_at': run_timestamp(),
        'inputs': {input_path.name: sha256_file(input_path)},
        'alpha': args.alpha,
        'seed': resolved_seed(args),
        'tie_correction': tie_correction,
    }


def emit_document(args: argparse.Namespace, document: dict, verdicts: Sequence[str], render_markdown) -> None:
    text = render_json(document)
    if not args.json:
        for line in verdicts:
            print(line)
    print(text, end='')
    if args.output is not None:
        args.output.parent.mkdir(parents=True, exist_ok=True)
        write_text(args.output, text)
    if args.markdown is not None:
        args.markdown.parent.mkdir(parents=True, exist_ok=True)
        write_text(args.markdown, render_markdown(document))


if __name__ == '__main__':
    sys.exit(main())

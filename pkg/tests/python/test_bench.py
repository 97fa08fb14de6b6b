import importlib
import json
import random
import time
from pathlib import Path

import pytest


DETERMINISTIC = {
    'provider_id': 'deterministic',
    'model_id': 'lexical',
    'endpoint': 'deterministic',
    'max_units': 2000,
    'dim': 64,
}


def load_bench():
    return importlib.import_module('bench')


def write_jsonl(path: Path, rows: list[dict]) -> Path:
    path.write_text(''.join(json.dumps(row) + '\n' for row in rows), encoding='utf-8')
    return path


def write_providers(path: Path, *entries: dict) -> Path:
    path.write_text(json.dumps({'providers': list(entries)}), encoding='utf-8')
    return path


def common_args(tmp_path: Path, providers: Path) -> list[str]:
    return ['--providers', str(providers), '--cache-dir', str(tmp_path / 'cache'), '--seed', '0']


def test_validate_reports_counts_and_errors(tmp_path: Path, corpus_lines, capsys) -> None:
    bench = load_bench()
    good = write_jsonl(tmp_path / 'good.jsonl', corpus_lines)
    corpus_lines[2]['baseline_rank'] = 3
    bad = write_jsonl(tmp_path / 'bad.jsonl', corpus_lines)

    assert bench.main(['validate', str(good)]) == 0
    assert '1 topics, 4 resources, 1 evaluable' in capsys.readouterr().out

    assert bench.main(['validate', str(bad)]) == 1
    assert 'error: topic T1 / resource r1: baseline_rank 3 repeats resource a1.' in capsys.readouterr().out

    assert bench.main(['validate', str(bad), '--json']) == 1
    payload = json.loads(capsys.readouterr().out)
    assert payload['ok'] is False
    assert payload['errors'][0]['location'] == 'topic T1 / resource r1'


def test_validate_json_reports_unreadable_corpus(tmp_path: Path, capsys) -> None:
    bench = load_bench()
    broken = tmp_path / 'broken.jsonl'
    broken.write_text('{"topic_id": \n', encoding='utf-8')

    assert bench.main(['validate', str(broken), '--json']) == 1
    payload = json.loads(capsys.readouterr().out)
    assert payload['ok'] is False
    assert 'broken.jsonl:1' in payload['errors'][0]['message']

    assert bench.main(['validate', str(broken)]) == 1
    assert capsys.readouterr().err.startswith('error: ')


def test_usage_errors_exit_with_status_two(tmp_path: Path, corpus_lines) -> None:
    bench = load_bench()
    corpus = write_jsonl(tmp_path / 'corpus.jsonl', corpus_lines)

    with pytest.raises(SystemExit) as excinfo:
        bench.main(['evaluate', str(corpus)])
    assert excinfo.value.code == 2


def test_embed_fills_cache_then_reuses_it(tmp_path: Path, corpus_lines, capsys) -> None:
    bench = load_bench()
    corpus = write_jsonl(tmp_path / 'corpus.jsonl', corpus_lines)
    providers = write_providers(tmp_path / 'providers.json', DETERMINISTIC)
    args = ['embed', str(corpus), *common_args(tmp_path, providers)]

    assert bench.main(args) == 0
    first = capsys.readouterr()
    assert len(list((tmp_path / 'cache').glob('*.json'))) == 4
    assert 'deterministic/lexical: 4 resources embedded, 0 cache hits, 4 requests, 0 failures' in first.out
    assert '[embed] deterministic/lexical: 4/4 resources' in first.err

    assert bench.main(args) == 0
    assert '4 cache hits, 0 requests' in capsys.readouterr().out


def test_embed_without_credential_names_the_variable(tmp_path: Path, corpus_lines, monkeypatch, capsys) -> None:
    bench = load_bench()
    monkeypatch.delenv('ALIGNBENCH_TEST_KEY', raising=False)
    corpus = write_jsonl(tmp_path / 'corpus.jsonl', corpus_lines)
    providers = write_providers(
        tmp_path / 'providers.json',
        {
            'provider_id': 'remote',
            'model_id': 'embed-1',
            'endpoint': 'https://embeddings.invalid/v1/embeddings',
            'max_units': 1000,
            'credential_env_var': 'ALIGNBENCH_TEST_KEY',
        },
    )

    assert bench.main(['embed', str(corpus), *common_args(tmp_path, providers)]) == 1
    err = capsys.readouterr().err
    assert err.startswith('error: ')
    assert 'ALIGNBENCH_TEST_KEY' in err


def test_evaluate_requires_cached_embeddings(tmp_path: Path, corpus_lines, capsys) -> None:
    bench = load_bench()
    corpus = write_jsonl(tmp_path / 'corpus.jsonl', corpus_lines)
    providers = write_providers(tmp_path / 'providers.json', DETERMINISTIC)

    status = bench.main(['evaluate', str(corpus), '--output-dir', str(tmp_path / 'out'), *common_args(tmp_path, providers)])

    assert status == 1
    assert 'deterministic/lexical lacks 4 embedding(s)' in capsys.readouterr().err


def test_evaluate_writes_reports(tmp_path: Path, corpus_lines, capsys) -> None:
    bench = load_bench()
    corpus = write_jsonl(tmp_path / 'corpus.jsonl', corpus_lines)
    providers = write_providers(tmp_path / 'providers.json', DETERMINISTIC)
    options = common_args(tmp_path, providers)
    out = tmp_path / 'out'

    assert bench.main(['embed', str(corpus), *options]) == 0
    assert bench.main(['evaluate', str(corpus), '--output-dir', str(out), *options]) == 0
    stdout = capsys.readouterr().out

    names = sorted(path.name for path in out.iterdir())
    assert names == [
        'agreement.csv',
        'domains.csv',
        'per_topic.csv',
        'rankings.jsonl',
        'report.md',
        'run_manifest.json',
        'summary.csv',
    ]
    per_topic = (out / 'per_topic.csv').read_text().splitlines()
    assert per_topic[0] == 'model_id,topic_id,domain,accuracy,precision_at_3,precision_at_5,pair_count,reference_count'
    assert per_topic[1] == 'baseline,T1,Python Programming,0.75,0.6666666666666666,0.4,4,1'
    assert per_topic[2].startswith('deterministic/lexical,T1,Python Programming,')
    assert per_topic[2].endswith(',4,2')
    assert (out / 'agreement.csv').read_text().startswith('model_id,topic_id,kendall_tau\ndeterministic/lexical,T1,')
    assert len((out / 'rankings.jsonl').read_text().splitlines()) == 3

    manifest = json.loads((out / 'run_manifest.json').read_text())
    assert manifest['policy'] == 'all_accepted'
    assert manifest['ks'] == [3, 5]
    assert manifest['providers'][0]['label'] == 'deterministic/lexical'
    assert len(manifest['corpus_digest']) == 64
    assert 'baseline: accuracy 0.750' in stdout


def test_evaluate_custom_cutoffs_and_random_policy(tmp_path: Path, corpus_lines, capsys) -> None:
    bench = load_bench()
    corpus = write_jsonl(tmp_path / 'corpus.jsonl', corpus_lines)
    providers = write_providers(tmp_path / 'providers.json', DETERMINISTIC)
    options = common_args(tmp_path, providers)
    out = tmp_path / 'out'
    assert bench.main(['embed', str(corpus), *options]) == 0
    capsys.readouterr()

    status = bench.main(
        ['evaluate', str(corpus), '--output-dir', str(out), '--k', '1', '--k', '2', '--policy', 'random', '--json', *options]
    )

    assert status == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload['topics'] == 1
    header, baseline_row, model_row = (out / 'per_topic.csv').read_text().splitlines()
    assert header.split(',')[4:6] == ['precision_at_1', 'precision_at_2']
    assert baseline_row.endswith(',1.0,0.5,4,1')
    assert model_row.endswith(',2,1')
    assert (out / 'summary.csv').read_text().startswith('model_id,mean_accuracy,sd_accuracy,mean_p1,sd_p1,mean_p2,sd_p2,topic_count\n')


def test_evaluate_skips_topics_without_reference_pairs(tmp_path: Path, corpus_lines, capsys) -> None:
    bench = load_bench()
    thin = {**corpus_lines[0], 'topic_id': 'T2', 'resource_id': 'b1', 'baseline_rank': 1}
    thin_rejected = {**corpus_lines[2], 'topic_id': 'T2', 'resource_id': 'b2', 'baseline_rank': 2}
    corpus = write_jsonl(tmp_path / 'corpus.jsonl', [*corpus_lines, thin, thin_rejected])
    providers = write_providers(tmp_path / 'providers.json', DETERMINISTIC)
    options = common_args(tmp_path, providers)
    out = tmp_path / 'out'

    assert bench.main(['embed', str(corpus), *options]) == 0
    assert bench.main(['evaluate', str(corpus), '--output-dir', str(out), *options]) == 0

    topics = {line.split(',')[1] for line in (out / 'per_topic.csv').read_text().splitlines()[1:]}
    assert topics == {'T1'}


def per_topic_csv(path: Path, cells: dict[tuple[str, str], float]) -> Path:
    lines = ['model_id,topic_id,domain,accuracy,precision_at_3,precision_at_5,pair_count,reference_count']
    for (model_id, topic_id), accuracy in cells.items():
        lines.append(f'{model_id},{topic_id},Python,{accuracy!r},0.5,0.4,4,1')
    path.write_text('\n'.join(lines) + '\n')
    return path


def test_stats_reports_friedman_and_nemenyi(tmp_path: Path, capsys) -> None:
    bench = load_bench()
    cells = {}
    for topic in range(5):
        for model, accuracy in (('a', 0.1), ('b', 0.5), ('c', 0.9)):
            cells[(model, f'T{topic}')] = accuracy
    source = per_topic_csv(tmp_path / 'per_topic.csv', cells)
    output = tmp_path / 'reports' / 'stats.json'
    markdown = tmp_path / 'reports' / 'stats.md'

    assert bench.main(['stats', str(source), '--output', str(output), '--markdown', str(markdown)]) == 0
    stdout = capsys.readouterr().out

    assert stdout.startswith('Friedman test: chi2(2) = 10.00, p = .007')
    assert 'c significantly outperforms a' in stdout
    document = json.loads(output.read_text())
    assert document['friedman']['chi_square'] == 10.0
    assert document['friedman']['kendalls_w'] == 1.0
    assert document['nemenyi']['k'] == 3
    assert document['nemenyi_notice'] is None
    assert document['manifest']['inputs'] == {'per_topic.csv': document['manifest']['inputs']['per_topic.csv']}
    assert stdout.endswith(output.read_text())
    assert '| 5 | 3 | 10.00 | 2 | 0.007 | 1.00 | no |' in markdown.read_text()


def test_stats_rejects_incomplete_matrix(tmp_path: Path, capsys) -> None:
    bench = load_bench()
    source = per_topic_csv(tmp_path / 'per_topic.csv', {('a', 'T1'): 0.9, ('b', 'T1'): 0.8, ('a', 'T2'): 0.7})

    assert bench.main(['stats', str(source)]) == 1
    assert 'missing cells: b/T2' in capsys.readouterr().err


def test_stats_skips_nemenyi_beyond_table(tmp_path: Path, capsys) -> None:
    bench = load_bench()
    rng = random.Random(4)
    cells = {(f'model{model:02d}', f'T{topic}'): rng.random() for topic in range(4) for model in range(21)}
    source = per_topic_csv(tmp_path / 'per_topic.csv', cells)

    assert bench.main(['stats', str(source), '--json']) == 0
    document = json.loads(capsys.readouterr().out)

    assert document['nemenyi'] is None
    assert document['nemenyi_notice'].startswith('Nemenyi skipped: k must be between 2 and 20')
    assert document['friedman']['k'] == 21


def learner_rows(groups: dict[int, list[float]]) -> list[dict]:
    rows = []
    for group, scores in groups.items():
        for index, score in enumerate(scores):
            rows.append({'participant_id': f'P{group}{index}', 'topic_id': 'T1', 'group': group, 'score': score})
    return rows


def test_learner_reports_kruskal_and_dunn(tmp_path: Path, capsys) -> None:
    bench = load_bench()
    scores = write_jsonl(tmp_path / 'scores.jsonl', learner_rows({1: [1, 2, 3], 2: [4, 5, 6], 3: [7, 8, 9]}))
    markdown = tmp_path / 'learner.md'

    assert bench.main(['learner', str(scores), '--markdown', str(markdown)]) == 0
    stdout = capsys.readouterr().out

    lines = stdout.splitlines()
    assert lines[0] == 'Kruskal-Wallis test: chi2(2) = 7.20, p = .027; significant at alpha = 0.05.'
    assert lines[1].startswith('G1 vs G2: z = ')
    document = json.loads(stdout[stdout.index('{'):])
    assert document['kruskal_wallis']['h_statistic'] == 7.2
    assert document['kruskal_wallis']['group_sizes'] == {'G1': 3, 'G2': 3, 'G3': 3}
    assert [row['group_a'] + row['group_b'] for row in document['dunn']['comparisons']] == ['G1G2', 'G1G3', 'G2G3']
    assert document['manifest']['tie_correction'] == {'kruskal_wallis': True, 'dunn': True}
    assert '| G3 | 3 | 8.0 |' in markdown.read_text()


def test_learner_all_equal_scores_and_single_group(tmp_path: Path, capsys) -> None:
    bench = load_bench()
    flat = write_jsonl(tmp_path / 'flat.jsonl', learner_rows({1: [5, 5, 5], 2: [5, 5, 5], 3: [5, 5, 5]}))
    single = write_jsonl(tmp_path / 'single.jsonl', learner_rows({2: [1, 2, 3]}))

    assert bench.main(['learner', str(flat), '--json', '--no-tie-correction']) == 0
    document = json.loads(capsys.readouterr().out)
    assert document['kruskal_wallis']['h_statistic'] == 0.0
    assert document['kruskal_wallis']['p_value'] == 1.0
    assert document['kruskal_wallis']['degenerate'] is True
    assert all(row['p_unadjusted'] == 1.0 for row in document['dunn']['comparisons'])

    assert bench.main(['learner', str(single)]) == 1
    assert 'need at least 2 learner groups' in capsys.readouterr().err


def synthetic_setup(tmp_path: Path, *, dim: int = 256, generated_per_label: int = 0):
    synthetic = importlib.import_module('synthetic')
    corpus_module = importlib.import_module('corpus')
    corpus = synthetic.make_synthetic_corpus(seed=3, generated_per_label=generated_per_label)
    corpus_path = tmp_path / 'synthetic.jsonl'
    corpus_module.write_corpus(corpus, corpus_path)
    providers = write_providers(tmp_path / 'providers.json', {**DETERMINISTIC, 'dim': dim})
    return corpus, corpus_path, providers


def test_planted_signal_beats_shuffled_rankings(tmp_path: Path, capsys) -> None:
    bench = load_bench()
    reports = importlib.import_module('reports')
    metrics = importlib.import_module('metrics')
    rank = importlib.import_module('rank')
    corpus, corpus_path, providers = synthetic_setup(tmp_path)
    options = common_args(tmp_path, providers)
    out = tmp_path / 'out'
    started = time.perf_counter()

    assert bench.main(['embed', str(corpus_path), *options]) == 0
    assert bench.main(['evaluate', str(corpus_path), '--output-dir', str(out), *options]) == 0
    capsys.readouterr()

    elapsed = time.perf_counter() - started
    summary = reports.read_string_table(out / 'summary.csv')
    by_model = dict(zip(summary['model_id'], (float(value) for value in summary['mean_accuracy'])))
    assert by_model['deterministic/lexical'] >= 0.95

    rng = random.Random(99)
    shuffled_means = []
    for _ in range(100):
        accuracies = []
        for topic in corpus.topics:
            ids = [resource.resource_id for resource in topic.resources]
            rng.shuffle(ids)
            entries = tuple(rank.RankedEntry(resource_id, float(-index)) for index, resource_id in enumerate(ids))
            ranking = rank.RankedList(topic.topic_id, rank.BASELINE_REFERENCE, entries)
            accuracies.append(metrics.pairwise_accuracy(ranking, topic.labels()).accuracy)
        shuffled_means.append(sum(accuracies) / len(accuracies))
    shuffled = sum(shuffled_means) / len(shuffled_means)
    assert 0.35 <= shuffled <= 0.65
    assert by_model['deterministic/lexical'] > shuffled
    assert elapsed < 30


def test_full_runs_are_byte_identical(tmp_path: Path, monkeypatch, capsys) -> None:
    bench = load_bench()
    monkeypatch.setenv('SOURCE_DATE_EPOCH', '1700000000')
    _, corpus_path, providers = synthetic_setup(tmp_path, dim=64, generated_per_label=1)

    def run(name: str) -> Path:
        out = tmp_path / name
        options = ['--providers', str(providers), '--cache-dir', str(tmp_path / f'cache-{name}'), '--seed', '11']
        assert bench.main(['embed', str(corpus_path), *options]) == 0
        assert bench.main(['evaluate', str(corpus_path), '--output-dir', str(out), '--policy', 'random', *options]) == 0
        assert bench.main(['stats', str(out / 'per_topic.csv'), '--output', str(out / 'stats.json'), '--json']) == 0
        return out

    first = run('first')
    second = run('second')
    capsys.readouterr()

    names = sorted(path.name for path in first.iterdir())
    assert 'generated.csv' in names and 'stats.json' in names
    assert names == sorted(path.name for path in second.iterdir())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
    manifest = json.loads((first / 'run_manifest.json').read_text())
    assert manifest['created_at'] == '2023-11-14T22:13:20Z'
    assert manifest['seed'] == 11


def test_scaling_synthetic_embeddings_keeps_every_ranking(tmp_path: Path) -> None:
    rank = importlib.import_module('rank')
    embed = importlib.import_module('embed')
    providers = importlib.import_module('providers')
    corpus, _, providers_path = synthetic_setup(tmp_path, dim=32)
    provider = providers.build_provider(providers.load_provider_configs(providers_path)[0])

    embeddings = embed.embed_corpus(provider, corpus, None, report_progress=False)
    scaled = {resource_id: vector.scaled(7.3) for resource_id, vector in embeddings.items()}

    for policy in (rank.ReferencePolicy(), rank.ReferencePolicy(rank.ReferenceMode.SINGLE_RANDOM, seed=5)):
        for topic in corpus.topics:
            original = rank.rank_topic(topic, embeddings, policy)
            rescaled = rank.rank_topic(topic, scaled, policy)
            assert [ranking.resource_ids() for ranking in original] == [ranking.resource_ids() for ranking in rescaled]

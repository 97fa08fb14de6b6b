import importlib
from pathlib import Path

import pytest


def load_common():
    return importlib.import_module('common')


def test_load_env_file_sets_values_and_skips_comments(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    common = load_common()
    env_path = tmp_path / '.env'
    env_path.write_text('# provider keys\n\nVOYAGE_API_KEY = secret-value\nALIGNBENCH_SEED=7\n')
    monkeypatch.setenv('VOYAGE_API_KEY', 'placeholder')
    monkeypatch.setenv('ALIGNBENCH_SEED', '0')

    common.load_env_file(env_path)

    assert common.get_required_env('VOYAGE_API_KEY') == 'secret-value'
    assert common.default_seed() == 7


def test_load_env_file_requires_explicit_path_to_exist(tmp_path: Path) -> None:
    common = load_common()

    with pytest.raises(common.ConfigurationError, match='not found'):
        common.load_env_file(tmp_path / 'missing.env')


def test_get_required_env_names_missing_variable(monkeypatch: pytest.MonkeyPatch) -> None:
    common = load_common()
    monkeypatch.delenv('ALIGNBENCH_TEST_TOKEN', raising=False)

    with pytest.raises(common.ConfigurationError, match='ALIGNBENCH_TEST_TOKEN'):
        common.get_required_env('ALIGNBENCH_TEST_TOKEN')


def test_get_int_env_rejects_non_integer(monkeypatch: pytest.MonkeyPatch) -> None:
    common = load_common()
    monkeypatch.setenv('ALIGNBENCH_PROGRESS_EVERY', 'often')

    with pytest.raises(common.ConfigurationError, match='ALIGNBENCH_PROGRESS_EVERY'):
        common.progress_every()


def test_run_timestamp_honors_source_date_epoch(monkeypatch: pytest.MonkeyPatch) -> None:
    common = load_common()
    monkeypatch.setenv('SOURCE_DATE_EPOCH', '1700000000')

    assert common.run_timestamp() == '2023-11-14T22:13:20Z'


def test_resolve_repo_path_keeps_absolute_paths(tmp_path: Path) -> None:
    common = load_common()

    assert common.resolve_repo_path(tmp_path) == tmp_path
    assert common.resolve_repo_path('data/cache') == common.REPO_ROOT / 'data' / 'cache'


def test_sha256_file_digests_bytes(tmp_path: Path) -> None:
    common = load_common()
    path = tmp_path / 'empty.txt'
    path.write_bytes(b'')

    assert common.sha256_file(path) == 'e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855'

"""
Shared utilities for the alignment benchmark modules.

Centralizes environment loading, path resolution, file digests, and the
environment-driven defaults used by the command line.
"""

from __future__ import annotations

import hashlib
import os
from datetime import datetime, timezone
from pathlib import Path


REPO_ROOT = Path(__file__).resolve().parents[2]
DEFAULT_ENV_PATH = REPO_ROOT / '.env'
TOOL_VERSION = '0.1.0'


class ConfigurationError(RuntimeError):
    """Raised when required runtime configuration is missing or invalid."""


def load_env_file(env_path: str | Path | None = None) -> None:
    """
    Copy KEY=VALUE lines from a dotenv file (default: repo-level '.env') into os.environ.

    Blank lines and '#' comments are skipped; values split on the first '='.
    A missing default file is ignored, a missing explicit path raises
    ConfigurationError.
    """
    env_file = DEFAULT_ENV_PATH if env_path is None else Path(env_path).expanduser()
    if not env_file.exists():
        if env_path is None:
            return
        raise ConfigurationError(f"Environment file '{env_file}' not found.")

    with open(env_file, 'r', encoding='utf-8') as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith('#') and '=' in line:
                key, value = line.split('=', 1)
                os.environ[key.strip()] = value.strip()


def get_required_env(key: str) -> str:
    """Get a required environment variable or raise a configuration error."""
    value = os.environ.get(key)
    if not value:
        raise ConfigurationError(
            f"Required environment variable '{key}' is not set. Export it or add it to your .env file."
        )
    return value


def get_optional_env(key: str, default: str = '') -> str:
    """Get optional environment variable with a default value."""
    return os.environ.get(key, default)


def get_int_env(key: str, default: int) -> int:
    """Read an integer setting from the environment."""
    raw_value = get_optional_env(key, str(default)).strip()
    try:
        return int(raw_value)
    except ValueError as error:
        raise ConfigurationError(f"Environment variable '{key}' must be an integer, got {raw_value!r}.") from error


def resolve_repo_path(path_value: str | Path) -> Path:
    """Resolve a path relative to the repository root when needed."""
    path = Path(path_value).expanduser()
    if path.is_absolute():
        return path
    return (REPO_ROOT / path).resolve()


def default_cache_dir() -> Path:
    return Path(get_optional_env('ALIGNBENCH_CACHE_DIR', './data/embedding-cache')).expanduser()


def default_providers_path() -> Path:
    return Path(get_optional_env('ALIGNBENCH_PROVIDERS', './providers.json')).expanduser()


def default_seed() -> int:
    return get_int_env('ALIGNBENCH_SEED', 0)


def progress_every() -> int:
    """Number of completed items between progress lines."""
    return max(1, get_int_env('ALIGNBENCH_PROGRESS_EVERY', 25))


def run_timestamp() -> str:
    """
    Return the run timestamp as ISO-8601 UTC.

    Honors SOURCE_DATE_EPOCH so that reports from repeated runs can be
    byte-identical.
    """
    epoch = get_optional_env('SOURCE_DATE_EPOCH').strip()
    if epoch:
        try:
            moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
        except ValueError as error:
            raise ConfigurationError(f'SOURCE_DATE_EPOCH must be an integer, got {epoch!r}.') from error
    else:
        moment = datetime.now(tz=timezone.utc).replace(microsecond=0)
    return moment.isoformat().replace('+00:00', 'Z')


def sha256_file(path: str | Path) -> str:
    """Hex SHA-256 digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for block in iter(lambda: handle.read(1024 * 1024), b''):
            digest.update(block)
    return digest.hexdigest()

"""
Embedding provider configuration and clients.

Providers turn a list of segment strings into one vector per segment. The
deterministic provider works offline; the HTTP provider speaks the common
`{"model", "input"} -> data[i].embedding` JSON shape.
"""

from __future__ import annotations

import json
import logging
import threading
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Protocol

import httpx
from tenacity import (
    RetryError,
    Retrying,
    before_sleep_log,
    retry_if_exception,
    stop_after_attempt,
    wait_exponential_jitter,
)

from common import ConfigurationError, get_required_env
from segments import Unit
from vectors import EmbeddingVector, deterministic_embed

LOGGER = logging.getLogger(__name__)

DETERMINISTIC_ENDPOINT = 'deterministic'
POOLING_MODES = ('mean', 'length_weighted')
RETRYABLE_STATUS = frozenset({408, 429, 500, 502, 503, 504})


class ProviderError(RuntimeError):
    """Raised when a provider fails after retries or returns bad data."""

    def __init__(self, provider_id: str, message: str, status: int | None = None) -> None:
        self.provider_id = provider_id
        self.status = status
        detail = f' (HTTP {status})' if status is not None else ''
        super().__init__(f'{provider_id}{detail}: {message}')


@dataclass(frozen=True, slots=True)
class ProviderConfig:
    provider_id: str
    model_id: str
    endpoint: str
    max_units: int
    unit: Unit = Unit.CHARACTERS
    max_parallel_requests: int = 1
    max_retries: int = 3
    credential_env_var: str = ''
    dim: int | None = None
    seed: int = 0
    pooling: str = 'mean'
    timeout_seconds: float = 60.0
    batch_size: int = 64

    @property
    def label(self) -> str:
        return f'{self.provider_id}/{self.model_id}'

    @property
    def is_deterministic(self) -> bool:
        return self.endpoint == DETERMINISTIC_ENDPOINT

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload['unit'] = str(self.unit)
        return payload


def load_provider_configs(path: str | Path) -> list[ProviderConfig]:
    """Load and normalize a provider configuration file."""
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigurationError(f"Provider config '{config_path}' not found.")
    try:
        with open(config_path, 'r', encoding='utf-8') as handle:
            raw = json.load(handle)
    except json.JSONDecodeError as error:
        raise ConfigurationError(f"Provider config '{config_path}' is not valid JSON: {error.msg}.") from error

    entries = raw.get('providers') if isinstance(raw, dict) else raw
    if not isinstance(entries, list) or not entries:
        raise ConfigurationError(f"Provider config '{config_path}' is empty or invalid.")

    configs: list[ProviderConfig] = []
    seen_labels: set[str] = set()
    for entry in entries:
        config = parse_provider_config(entry)
        if config.label in seen_labels:
            raise ConfigurationError(f"Duplicate provider '{config.label}' in '{config_path}'")
        seen_labels.add(config.label)
        configs.append(config)
    return configs


def parse_provider_config(entry: Any) -> ProviderConfig:
    if not isinstance(entry, Mapping):
        raise ConfigurationError(f'Invalid provider entry: {entry!r}')

    provider_id = str(entry.get('provider_id', '')).strip()
    model_id = str(entry.get('model_id', '')).strip()
    endpoint = str(entry.get('endpoint', '')).strip()
    if not provider_id or not model_id or not endpoint:
        raise ConfigurationError(f'Provider entry missing required fields: {entry!r}')

    try:
        unit = Unit(entry.get('unit', Unit.CHARACTERS))
    except ValueError as error:
        raise ConfigurationError(
            f"Provider '{provider_id}' unit must be 'characters' or 'whitespace_tokens'."
        ) from error

    pooling = str(entry.get('pooling', 'mean'))
    if pooling not in POOLING_MODES:
        raise ConfigurationError(f"Provider '{provider_id}' pooling must be one of {', '.join(POOLING_MODES)}.")

    config = ProviderConfig(
        provider_id=provider_id,
        model_id=model_id,
        endpoint=endpoint,
        max_units=require_int(entry, 'max_units', provider_id, minimum=1, required=True),
        unit=unit,
        max_parallel_requests=require_int(entry, 'max_parallel_requests', provider_id, minimum=1, default=1),
        max_retries=require_int(entry, 'max_retries', provider_id, minimum=0, default=3),
        credential_env_var=str(entry.get('credential_env_var', '') or '').strip(),
        dim=require_int(entry, 'dim', provider_id, minimum=2, default=None),
        seed=require_int(entry, 'seed', provider_id, minimum=None, default=0),
        pooling=pooling,
        timeout_seconds=float(entry.get('timeout_seconds', 60.0)),
        batch_size=require_int(entry, 'batch_size', provider_id, minimum=1, default=64),
    )
    if config.is_deterministic:
        if config.dim is None:
            raise ConfigurationError(f"Deterministic provider '{provider_id}' requires 'dim'.")
    else:
        if not config.endpoint.startswith(('http://', 'https://')):
            raise ConfigurationError(
                f"Provider '{provider_id}' endpoint must be an http(s) URL or 'deterministic'."
            )
        if not config.credential_env_var:
            raise ConfigurationError(f"HTTP provider '{provider_id}' requires 'credential_env_var'.")
    return config


def require_int(
    entry: Mapping[str, Any],
    key: str,
    provider_id: str,
    *,
    minimum: int | None,
    default: int | None = None,
    required: bool = False,
) -> int | None:
    if key not in entry or entry[key] is None:
        if required:
            raise ConfigurationError(f"Provider '{provider_id}' is missing '{key}'.")
        return default
    value = entry[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"Provider '{provider_id}' {key} must be an integer, got {value!r}.")
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"Provider '{provider_id}' {key} must be >= {minimum}, got {value}.")
    return value


class EmbeddingProvider(Protocol):
    config: ProviderConfig
    request_count: int

    def embed_segments(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


class DeterministicProvider:
    """Offline provider backed by deterministic_embed."""

    def __init__(self, config: ProviderConfig) -> None:
        self.config = config
        self.request_count = 0
        self._lock = threading.Lock()

    def embed_segments(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        with self._lock:
            self.request_count += 1
        assert self.config.dim is not None
        return [
            deterministic_embed(
                text,
                self.config.dim,
                self.config.seed,
                provider_id=self.config.provider_id,
                model_id=self.config.model_id,
            )
            for text in texts
        ]


class HttpEmbeddingProvider:
    """Client for JSON embeddings endpoints with bearer-token auth and retries."""

    def __init__(self, config: ProviderConfig, *, client: httpx.Client | None = None) -> None:
        self.config = config
        self.request_count = 0
        self._lock = threading.Lock()
        token = get_required_env(config.credential_env_var)
        self._client = client or httpx.Client(timeout=config.timeout_seconds)
        self._headers = {'Authorization': f'Bearer {token}', 'Content-Type': 'application/json'}
        self.wait = wait_exponential_jitter(initial=1, max=30)

    def close(self) -> None:
        self._client.close()

    def embed_segments(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        vectors: list[EmbeddingVector] = []
        batch_size = self.config.batch_size
        for start in range(0, len(texts), batch_size):
            vectors.extend(self._embed_batch(list(texts[start:start + batch_size])))
        return vectors

    def _embed_batch(self, batch: list[str]) -> list[EmbeddingVector]:
        retrying = Retrying(
            stop=stop_after_attempt(self.config.max_retries + 1),
            wait=self.wait,
            retry=retry_if_exception(is_retryable),
            before_sleep=before_sleep_log(LOGGER, logging.WARNING),
            reraise=False,
        )
        try:
            payload = retrying(self._post, batch)
        except RetryError as error:
            cause = error.last_attempt.exception()
            raise ProviderError(
                self.config.provider_id,
                f'request failed after {self.config.max_retries + 1} attempt(s): {cause}',
                status=response_status(cause),
            ) from cause
        except httpx.HTTPStatusError as error:
            raise ProviderError(
                self.config.provider_id,
                'request rejected',
                status=error.response.status_code,
            ) from error
        return self._parse_embeddings(payload, expected=len(batch))

    def _post(self, batch: list[str]) -> Any:
        with self._lock:
            self.request_count += 1
        response = self._client.post(
            self.config.endpoint,
            headers=self._headers,
            json={'model': self.config.model_id, 'input': batch},
        )
        response.raise_for_status()
        try:
            return response.json()
        except json.JSONDecodeError as error:
            raise ProviderError(self.config.provider_id, 'response was not valid JSON', response.status_code) from error

    def _parse_embeddings(self, payload: Any, *, expected: int) -> list[EmbeddingVector]:
        data = payload.get('data') if isinstance(payload, dict) else None
        if not isinstance(data, list) or len(data) != expected:
            raise ProviderError(
                self.config.provider_id,
                f'expected {expected} embeddings under data[], got {len(data) if isinstance(data, list) else data!r}',
            )
        if all(isinstance(item, dict) and isinstance(item.get('index'), int) for item in data):
            data = sorted(data, key=lambda item: item['index'])
        vectors = []
        for item in data:
            embedding = item.get('embedding') if isinstance(item, dict) else None
            if not isinstance(embedding, list) or not embedding:
                raise ProviderError(self.config.provider_id, 'response item lacks an embedding array')
            if self.config.dim is not None and len(embedding) != self.config.dim:
                raise ProviderError(
                    self.config.provider_id,
                    f'returned dimension {len(embedding)}, expected {self.config.dim}',
                )
            vectors.append(EmbeddingVector.from_array(embedding, self.config.provider_id, self.config.model_id))
        return vectors


def is_retryable(error: BaseException) -> bool:
    if isinstance(error, httpx.TransportError):
        return True
    if isinstance(error, httpx.HTTPStatusError):
        return error.response.status_code in RETRYABLE_STATUS
    return False


def response_status(error: BaseException | None) -> int | None:
    if isinstance(error, httpx.HTTPStatusError):
        return error.response.status_code
    return None


def build_provider(config: ProviderConfig, *, client: httpx.Client | None = None) -> EmbeddingProvider:
    """Instantiate the client for a config; missing credentials fail immediately."""
    if config.is_deterministic:
        return DeterministicProvider(config)
    return HttpEmbeddingProvider(config, client=client)

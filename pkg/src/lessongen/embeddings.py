"""Embedding vectors: remote provider client, offline deterministic embedder, cosine similarity.

Vectors are numpy float32 arrays throughout. The provider wire contract is
``POST {base_url}/embed`` with ``{"model": ..., "texts": [...]}`` returning
``{"vectors": [[...], ...]}``; auth is a bearer token read from the environment
variable named in the config (never logged).
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
import threading
import time
from dataclasses import dataclass

import httpx
import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_OFFLINE_DIM = 256

_RETRY_BASE_DELAY_S = 0.5
_RETRY_FACTOR = 2.0

_WORD = re.compile(r"[a-z0-9]+")


class ProviderError(RuntimeError):
    """Terminal provider failure (bad response, auth, contract violation)."""


class ProviderUnavailable(ProviderError):
    """Transport failure or 5xx persisting beyond max_retries."""


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str
    model_name: str
    api_key_env: str = ""
    timeout_ms: int = 30_000
    max_retries: int = 3
    batch_size: int = 64

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env) if self.api_key_env else None


def validate_vector(values: np.ndarray) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float32)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError("embedding vector must be a non-empty 1-D array")
    if not np.all(np.isfinite(vec)):
        raise ValueError("embedding vector contains non-finite values")
    return vec


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine similarity undefined for zero vector")
    sim = float(np.dot(a, b)) / (norm_a * norm_b)
    return max(-1.0, min(1.0, sim))


def deterministic_embed(text: str, dim: int = DEFAULT_OFFLINE_DIM) -> np.ndarray:
    """Hash-based embedding, a pure function of (text, dim), unit L2 norm.

    Each word is padded to ``^word$`` and split into character 3-grams; every
    gram is hashed to a bucket and accumulated with a +1/-1 sign taken from an
    independent hash byte. Signed bucket counts are then L2-normalized.
    """
    if dim < 8:
        raise ValueError("dim must be >= 8")
    if not text:
        raise ValueError("text must be non-empty")
    words = _WORD.findall(text.lower())
    if not words:
        raise ValueError("text contains no embeddable tokens")

    acc = np.zeros(dim, dtype=np.float64)
    for word in words:
        padded = f"^{word}$"
        for i in range(len(padded) - 2):
            digest = hashlib.blake2s(padded[i : i + 3].encode("utf-8"), digest_size=10).digest()
            bucket = int.from_bytes(digest[:8], "little") % dim
            sign = 1.0 if digest[8] % 2 == 0 else -1.0
            acc[bucket] += sign
    norm = float(np.linalg.norm(acc))
    if norm == 0.0:
        # Signed counts can cancel exactly on degenerate inputs; fall back to a
        # deterministic single-bucket vector so the unit-norm contract holds.
        digest = hashlib.blake2s(text.encode("utf-8"), digest_size=8).digest()
        acc[int.from_bytes(digest, "little") % dim] = 1.0
        norm = 1.0
    return (acc / norm).astype(np.float32)


class OfflineEmbedder:
    """Network-free embedder backed by :func:`deterministic_embed`."""

    def __init__(self, dim: int = DEFAULT_OFFLINE_DIM):
        self.dim = dim

    @property
    def embedder_id(self) -> str:
        return f"offline-3gram-{self.dim}"

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("texts must be non-empty")
        return [deterministic_embed(t, self.dim) for t in texts]


def post_json_with_retries(
    client: httpx.Client,
    url: str,
    payload: dict,
    config: ProviderConfig,
    *,
    semaphore: threading.Semaphore,
    sleep=time.sleep,
) -> httpx.Response:
    """POST with exponential backoff (base 500 ms, factor 2) on transport errors
    and 5xx only; 4xx is terminal. Idempotent-read semantics."""
    headers = {}
    key = config.api_key()
    if key:
        headers["Authorization"] = f"Bearer {key}"
    last_error: Exception | None = None
    for attempt in range(config.max_retries + 1):
        if attempt > 0:
            delay = _RETRY_BASE_DELAY_S * _RETRY_FACTOR ** (attempt - 1)
            logger.warning(
                "provider %s retry %d/%d after %s", url, attempt, config.max_retries, last_error
            )
            sleep(delay)
        try:
            with semaphore:
                response = client.post(url, json=payload, headers=headers)
        except httpx.TransportError as exc:
            last_error = exc
            continue
        if response.status_code >= 500:
            last_error = ProviderUnavailable(f"{url} returned {response.status_code}")
            continue
        if response.status_code >= 400:
            raise ProviderError(f"{url} rejected request: {response.status_code}")
        return response
    raise ProviderUnavailable(f"{url} unavailable after {config.max_retries} retries: {last_error}")


class HttpEmbedder:
    """Embedding provider client with bounded concurrency and retry on 5xx."""

    def __init__(
        self,
        config: ProviderConfig,
        *,
        max_concurrency: int = 4,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        self.config = config
        self._semaphore = threading.Semaphore(max_concurrency)
        self._sleep = sleep
        self._client = httpx.Client(
            timeout=config.timeout_ms / 1000.0,
            transport=transport,
        )

    @property
    def embedder_id(self) -> str:
        return self.config.model_name

    def close(self) -> None:
        self._client.close()

    def _post(self, url: str, payload: dict) -> httpx.Response:
        return post_json_with_retries(
            self._client, url, payload, self.config, semaphore=self._semaphore, sleep=self._sleep
        )

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("texts must be non-empty")
        if any(not t for t in texts):
            raise ValueError("texts must all be non-empty")
        url = self.config.base_url.rstrip("/") + "/embed"
        vectors: list[np.ndarray] = []
        for start in range(0, len(texts), self.config.batch_size):
            batch = texts[start : start + self.config.batch_size]
            response = self._post(url, {"model": self.config.model_name, "texts": batch})
            try:
                rows = response.json()["vectors"]
            except (KeyError, ValueError) as exc:
                raise ProviderError(f"malformed embed response: {exc}") from exc
            if len(rows) != len(batch):
                raise ProviderError(
                    f"count mismatch: sent {len(batch)} texts, got {len(rows)} vectors"
                )
            vectors.extend(validate_vector(row) for row in rows)
        dims = {v.shape[0] for v in vectors}
        if len(dims) > 1:
            raise ProviderError(f"dimension mismatch across batch: {sorted(dims)}")
        return vectors


def embed_texts(config: ProviderConfig, texts: list[str], **kwargs) -> list[np.ndarray]:
    """One-shot convenience wrapper around :class:`HttpEmbedder`."""
    embedder = HttpEmbedder(config, **kwargs)
    try:
        return embedder.embed_texts(texts)
    finally:
        embedder.close()

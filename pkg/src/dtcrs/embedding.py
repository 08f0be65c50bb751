"""Embedding providers.

All providers return L2-normalized float64 vectors, so cosine similarity is a
plain dot product downstream.
"""

from __future__ import annotations

import hashlib
import re
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import httpx
import numpy as np


class EmbeddingError(RuntimeError):
    """Backend or transport failure."""


class ProviderContractError(EmbeddingError):
    """Backend returned vectors of the wrong count, dimension, or value."""


@dataclass(frozen=True, eq=False)
class EmbeddingBatch:
    texts: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self) -> None:
        if self.vectors.ndim != 2 or len(self.vectors) != len(self.texts):
            raise ProviderContractError("one vector per text required")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.texts)


class Embedder(Protocol):
    def embed(self, texts: Sequence[str]) -> EmbeddingBatch: ...


def _normalize_rows(V: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(V, axis=1, keepdims=True)
    if np.any(norms == 0) or not np.all(np.isfinite(V)):
        raise ProviderContractError("embedding vectors must be finite and non-zero")
    return V / norms


def _check_texts(texts: Sequence[str]) -> tuple[str, ...]:
    texts = tuple(texts)
    if not texts:
        raise ValueError("embed() needs at least one text")
    for t in texts:
        if not isinstance(t, str) or not t.strip():
            raise ValueError("texts must be non-empty strings")
    return texts


_WORD_RE = re.compile(r"\w+")
_PUNCT_RE = re.compile(r"[^\w\s]")


class HashEmbedder:
    """Deterministic offline embedder.

    Each lowercased word token is mapped to a standard-normal vector drawn
    from a generator keyed by ``blake2b(f"{seed}:{token}")``; a text's
    embedding is the count-weighted sum of its token vectors, L2-normalized.
    This is a random projection of the token-count vector, so texts sharing
    vocabulary get high cosine similarity. Texts without word characters fall
    back to their punctuation tokens.
    """

    def __init__(self, dim: int = 16, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def token_vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(f"{self.seed}:{token}".encode("utf-8"), digest_size=8).digest()
            vec = np.random.default_rng(int.from_bytes(digest, "little")).standard_normal(self.dim)
            self._cache[token] = vec
        return vec

    def _vector(self, text: str) -> np.ndarray:
        tokens = _WORD_RE.findall(text.lower()) or _PUNCT_RE.findall(text)
        counts: dict[str, int] = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        acc = np.zeros(self.dim)
        for t in sorted(counts):
            acc += counts[t] * self.token_vector(t)
        return acc

    def embed(self, texts: Sequence[str]) -> EmbeddingBatch:
        texts = _check_texts(texts)
        V = np.array([self._vector(t) for t in texts])
        return EmbeddingBatch(texts, _normalize_rows(V))


class HttpEmbedder:
    """Posts ``{"texts": [...]}`` to ``url`` and expects ``{"vectors": [[...], ...]}``."""

    def __init__(self, url: str, *, api_key: str | None = None, timeout: float = 60.0, max_retries: int = 3,
                 batch_size: int = 64, client: httpx.Client | None = None, backoff: float = 1.0):
        self.url = url
        self.api_key = api_key
        self.max_retries = max_retries
        self.batch_size = batch_size
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=timeout)
        self.dim: int | None = None

    def _post(self, texts: list[str]) -> list:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = self._client.post(self.url, json={"texts": texts}, headers=headers)
                resp.raise_for_status()
                return resp.json()["vectors"]
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * 2**attempt)
        raise EmbeddingError(f"embedding request failed after {self.max_retries + 1} attempts: {last}")

    def embed(self, texts: Sequence[str]) -> EmbeddingBatch:
        texts = _check_texts(texts)
        rows: list = []
        for i in range(0, len(texts), self.batch_size):
            part = list(texts[i:i + self.batch_size])
            vectors = self._post(part)
            if len(vectors) != len(part):
                raise ProviderContractError(f"asked for {len(part)} vectors, got {len(vectors)}")
            rows.extend(vectors)
        dims = {len(r) for r in rows}
        if len(dims) != 1:
            raise ProviderContractError(f"mixed embedding dimensions {sorted(dims)}")
        (dim,) = dims
        if self.dim is not None and dim != self.dim:
            raise ProviderContractError(f"dimension changed from {self.dim} to {dim}")
        self.dim = dim
        return EmbeddingBatch(texts, _normalize_rows(np.array(rows, dtype=np.float64)))


def make_embedder(provider: str, **kwargs) -> Embedder:
    if provider == "test":
        return HashEmbedder(**kwargs)
    if provider == "http":
        return HttpEmbedder(**kwargs)
    raise ValueError(f"unknown embedding provider {provider!r}")

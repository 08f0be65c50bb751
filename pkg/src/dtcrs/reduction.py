"""Dimensionality reduction ahead of clustering.

Chunk and sub-question embeddings are reduced together in a single fit so
both live in the same low-dimensional space. Two interchangeable backends:
``linear`` (centered principal axes, exact and seed-free) and ``manifold``
(UMAP with cosine metric, requires ``umap-learn``).
"""

from __future__ import annotations

import sys
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class DegenerateInputError(ValueError):
    """Too few rows for the component-count rule."""


@dataclass(frozen=True)
class ReductionParams:
    n_neighbors: int = 10
    target_dim_cap: int = 10
    metric: str = "cosine"
    backend: str = "linear"
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_neighbors < 2:
            raise ValueError("n_neighbors must be >= 2")
        if self.target_dim_cap < 1:
            raise ValueError("target_dim_cap must be >= 1")
        if self.backend not in ("linear", "manifold"):
            raise ValueError(f"unknown reduction backend {self.backend!r}")
        if self.metric != "cosine":
            raise ValueError(f"unsupported metric {self.metric!r}")


@dataclass(frozen=True, eq=False)
class ReducedBatch:
    vectors: np.ndarray
    n_components: int
    split_index: int
    skipped: bool = False

    @property
    def head(self) -> np.ndarray:
        return self.vectors[: self.split_index]

    @property
    def tail(self) -> np.ndarray:
        return self.vectors[self.split_index:]


def n_components_rule(input_count: int, cap: int) -> int:
    """Target dimension: ``min(cap, input_count - 2)``."""
    if input_count < 3:
        raise DegenerateInputError(f"need at least 3 embeddings, got {input_count}")
    return min(cap, input_count - 2)


def _as_matrix(batch) -> np.ndarray:
    vectors = getattr(batch, "vectors", batch)
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(0, 0) if X.size == 0 else X[None, :]
    return X


def principal_axes(X: np.ndarray, k: int) -> np.ndarray:
    """Project centered rows onto the top-``k`` principal axes.

    Axis signs are fixed so the largest-magnitude loading is positive, which
    makes the output independent of the eigensolver's sign choice.
    """
    Xc = X - X.mean(axis=0)
    evals, evecs = np.linalg.eigh(Xc.T @ Xc)
    order = np.argsort(evals, kind="stable")[::-1][:k]
    axes = evecs[:, order]
    pivot = np.argmax(np.abs(axes), axis=0)
    signs = np.sign(axes[pivot, np.arange(axes.shape[1])])
    signs[signs == 0] = 1.0
    return Xc @ (axes * signs)


@lru_cache(maxsize=1)
def _umap_class():
    # umap's package init optionally pulls in TensorFlow for ParametricUMAP; hide it.
    hide_tf = "tensorflow" not in sys.modules
    if hide_tf:
        sys.modules["tensorflow"] = None  # type: ignore[assignment]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            from umap import UMAP
    except ImportError as exc:
        raise ImportError("the manifold backend needs umap-learn (pip install umap-learn)") from exc
    finally:
        if hide_tf:
            sys.modules.pop("tensorflow", None)
    return UMAP


def _manifold(X: np.ndarray, k: int, params: ReductionParams) -> np.ndarray:
    UMAP = _umap_class()
    n = len(X)
    reducer = UMAP(
        n_neighbors=min(params.n_neighbors, n - 1),
        n_components=k,
        metric=params.metric,
        random_state=params.rng_seed,
        init="spectral" if n > k + 1 else "random",
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return np.asarray(reducer.fit_transform(X), dtype=np.float64)


def reduce(vectors, params: ReductionParams = ReductionParams()) -> ReducedBatch:
    X = _as_matrix(vectors)
    return _reduce_rows(X, len(X), params)


def reduce_joint(chunks, subqs, params: ReductionParams = ReductionParams()) -> ReducedBatch:
    """Reduce chunk rows and sub-question rows in one fit; chunks come first."""
    A, B = _as_matrix(chunks), _as_matrix(subqs)
    if A.size and B.size and A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: chunks {A.shape[1]} vs sub-questions {B.shape[1]}")
    X = np.vstack([m for m in (A, B) if m.size]) if (A.size or B.size) else np.zeros((0, 0))
    return _reduce_rows(X, len(A), params)


def _reduce_rows(X: np.ndarray, split_index: int, params: ReductionParams) -> ReducedBatch:
    if not np.all(np.isfinite(X)):
        raise ValueError("embeddings must be finite")
    try:
        k = n_components_rule(len(X), params.target_dim_cap)
    except DegenerateInputError:
        return ReducedBatch(X.copy(), X.shape[1] if X.ndim == 2 else 0, split_index, skipped=True)
    k = min(k, X.shape[1])
    if params.backend == "linear":
        out = principal_axes(X, k)
    else:
        out = _manifold(X, k, params)
    return ReducedBatch(out, k, split_index)

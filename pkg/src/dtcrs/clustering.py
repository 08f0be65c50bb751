"""Gaussian-mixture soft clustering.

EM with full covariances, log-space responsibilities, BIC model selection
and threshold soft assignment. A two-stage (global, then local) hierarchical
variant serves as the question-independent baseline.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from . import _kernels

log = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]

DEFAULT_REG_FLOOR = 1e-6
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 200


def seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(2**63)))
    return np.random.SeedSequence(0 if seed is None else int(seed))


@dataclass(frozen=True, eq=False)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood: float
    n: int
    n_iter: int = 0
    converged: bool = True
    regularized: bool = False
    lnl_history: tuple[float, ...] = ()

    @property
    def M(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def param_count(self) -> int:
        m, d = self.M, self.dim
        return (m - 1) + m * d + m * d * (d + 1) // 2


@dataclass(frozen=True, eq=False)
class SoftAssignment:
    responsibilities: np.ndarray
    memberships: tuple[frozenset[int], ...]


def _check_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"points must be a 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("points must be finite")
    return X


def _log_weighted(X: np.ndarray, weights: np.ndarray, means: np.ndarray, covariances: np.ndarray) -> np.ndarray:
    chols = np.linalg.cholesky(covariances)
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    return _kernels.gaussian_log_prob(X, means, chols) + log_w


def kmeans_pp_centers(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Distance-weighted (k-means++) choice of ``k`` initial centers."""
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def em_fit(points, M: int, init=None, rng_seed: SeedLike = 0, *, reg_floor: float = DEFAULT_REG_FLOOR,
           tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> GmmModel:
    """Fit an ``M``-component full-covariance mixture by EM.

    ``init`` gives the initial means (e.g. sub-question embeddings) and is
    used exactly; otherwise means come from k-means++ seeding under
    ``rng_seed``. Initial covariances are the per-dimension data variance on
    the diagonal, initial weights uniform. Iteration stops when the
    log-likelihood changes by less than ``tol`` or after ``max_iter`` M-steps.
    """
    X = _check_points(points)
    n, d = X.shape
    if not 1 <= M <= n:
        raise ValueError(f"need 1 <= M <= number of points ({n}), got M={M}")

    if init is not None:
        means = np.array(init, dtype=np.float64)
        if means.shape != (M, d):
            raise ValueError(f"init means must have shape {(M, d)}, got {means.shape}")
    else:
        means = kmeans_pp_centers(X, M, np.random.default_rng(seed_sequence(rng_seed)))
    eye = np.eye(d)
    base = np.diag(X.var(axis=0)) + reg_floor * eye
    covariances = np.repeat(base[None], M, axis=0)
    weights = np.full(M, 1.0 / M)

    regularized = False
    history: list[float] = []
    converged = False
    n_iter = 0
    while True:
        logp = _log_weighted(X, weights, means, covariances)
        lse = logsumexp(logp, axis=1)
        lnl = float(lse.sum())
        if history and abs(lnl - history[-1]) < tol:
            history.append(lnl)
            converged = True
            break
        history.append(lnl)
        if n_iter >= max_iter:
            break
        resp = np.exp(logp - lse[:, None])
        nk = resp.sum(axis=0) + 10 * np.finfo(np.float64).eps
        weights = nk / n
        weights /= weights.sum()
        means = (resp.T @ X) / nk[:, None]
        scatter = _kernels.weighted_covariances(X, resp, nk, means)
        if not regularized and np.min(np.linalg.eigvalsh(scatter)) < reg_floor:
            regularized = True
        covariances = scatter + reg_floor * eye
        n_iter += 1

    if regularized:
        log.debug("em_fit: covariance collapse regularized (M=%d, n=%d)", M, n)
    return GmmModel(weights=weights, means=means, covariances=covariances, log_likelihood=lnl, n=n,
                    n_iter=n_iter, converged=converged, regularized=regularized, lnl_history=tuple(history))


def responsibilities(model: GmmModel, points) -> SoftAssignment:
    """Posterior component probabilities, rows normalized in log space."""
    X = _check_points(points)
    if X.shape[1] != model.dim:
        raise ValueError(f"points have dimension {X.shape[1]}, model has {model.dim}")
    logp = _log_weighted(X, model.weights, model.means, model.covariances)
    resp = np.exp(logp - logsumexp(logp, axis=1, keepdims=True))
    argmax = np.argmax(resp, axis=1)
    return SoftAssignment(resp, tuple(frozenset({int(a)}) for a in argmax))


def soft_assign(assignment: SoftAssignment | np.ndarray, threshold: float = 0.5) -> list[frozenset[int]]:
    """Components whose responsibility reaches ``threshold``; argmax if none does."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    resp = assignment.responsibilities if isinstance(assignment, SoftAssignment) else np.asarray(assignment)
    out = []
    for row in resp:
        members = frozenset(int(m) for m in np.flatnonzero(row >= threshold))
        out.append(members or frozenset({int(np.argmax(row))}))
    return out


def clusters_from_memberships(memberships: Sequence[Iterable[int]]) -> list[list[int]]:
    """Invert per-point memberships into per-cluster member lists, dropping empty clusters."""
    groups: dict[int, list[int]] = {}
    for i, members in enumerate(memberships):
        for c in members:
            groups.setdefault(c, []).append(i)
    return [groups[c] for c in sorted(groups)]


def bic(model: GmmModel) -> float:
    if model.n <= 0:
        raise ValueError("BIC needs n > 0")
    return math.log(model.n) * model.param_count - 2.0 * model.log_likelihood


def select_clusters_bic(points, M_range: Iterable[int], rng_seed: SeedLike = 0, **em_kwargs) -> tuple[int, GmmModel]:
    """Fit every candidate count in ``M_range`` and keep the lowest BIC (ties: smaller M)."""
    X = _check_points(points)
    candidates = sorted(set(int(m) for m in M_range))
    if not candidates:
        raise ValueError("M_range is empty")
    if candidates[0] < 1 or candidates[-1] > len(X):
        raise ValueError(f"M_range must lie in [1, {len(X)}], got {candidates[0]}..{candidates[-1]}")
    children = seed_sequence(rng_seed).spawn(len(candidates))
    best: tuple[float, int, GmmModel] | None = None
    for m, child in zip(candidates, children):
        model = em_fit(X, m, rng_seed=child, **em_kwargs)
        score = bic(model)
        if best is None or score < best[0]:
            best = (score, m, model)
    assert best is not None
    return best[1], best[2]


def _principal_split(X: np.ndarray, idx: list[int], parts: int) -> list[list[int]]:
    sub = X[idx] - X[idx].mean(axis=0)
    if np.allclose(sub, 0.0):
        order = np.arange(len(idx))
    else:
        _, _, vt = np.linalg.svd(sub, full_matrices=False)
        order = np.argsort(sub @ vt[0], kind="stable")
    return [[idx[i] for i in piece] for piece in np.array_split(order, parts) if len(piece)]


def _split_to_cap(X, idx, cap, max_clusters, threshold, seq, em_kwargs) -> list[list[int]]:
    if len(idx) <= cap:
        return [idx]
    s = len(idx)
    lo = max(2, math.ceil(s / cap))
    hi = min(s, max(lo, max_clusters), lo + 4)
    seq_fit, seq_rest = seq.spawn(2)
    _, model = select_clusters_bic(X[idx], range(lo, hi + 1), seq_fit, **em_kwargs)
    local = clusters_from_memberships(soft_assign(responsibilities(model, X[idx]), threshold))
    groups = [[idx[i] for i in g] for g in local]
    if any(len(g) >= s for g in groups):
        groups = _principal_split(X, idx, lo)
    out: list[list[int]] = []
    for g, child in zip(groups, seq_rest.spawn(len(groups))):
        out.extend(_split_to_cap(X, g, cap, max_clusters, threshold, child, em_kwargs))
    return out


def hierarchical_cluster(points, rng_seed: SeedLike = 0, *, cap: int = 10, max_clusters: int = 50,
                         threshold: float = 0.5, seeds=None, **em_kwargs) -> list[frozenset[int]]:
    """Global mixture clustering followed by local re-clustering of oversized clusters.

    The global stage picks its component count by BIC (or uses ``seeds`` as
    fixed initial means); every global cluster larger than ``cap`` is
    clustered again on its own, recursively, until all emitted clusters have
    at most ``cap`` members. Returns per-point cluster memberships.
    """
    X = _check_points(points)
    n = len(X)
    if n < 1:
        raise ValueError("need at least one point")
    seq_global, seq_local = seed_sequence(rng_seed).spawn(2)
    if seeds is not None:
        model = em_fit(X, len(seeds), init=seeds, **em_kwargs)
    else:
        _, model = select_clusters_bic(X, range(1, min(max_clusters, n) + 1), seq_global, **em_kwargs)
    global_groups = clusters_from_memberships(soft_assign(responsibilities(model, X), threshold))
    final: list[list[int]] = []
    for g, child in zip(global_groups, seq_local.spawn(len(global_groups))):
        final.extend(_split_to_cap(X, g, cap, max_clusters, threshold, child, em_kwargs))
    memberships: list[set[int]] = [set() for _ in range(n)]
    for cid, g in enumerate(final):
        for i in g:
            memberships[i].add(cid)
    return [frozenset(m) for m in memberships]

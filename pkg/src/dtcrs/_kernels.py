"""Hot numeric loops, compiled with numba when available.

Each kernel has a pure-numpy twin with the same signature. The compiled
versions are used unless numba is missing or ``DTCRS_DISABLE_NUMBA`` is set
to a truthy value before import. ``BACKEND`` reports the active choice.

    gaussian_log_prob(X, means, chols) -> (n, M) log N(x | mu_m, L_m L_m^T)
    weighted_covariances(X, resp, nk, means) -> (M, D, D) responsibility-weighted scatter / nk
    wlcs(a, b, weight) -> weighted longest common subsequence score of two int sequences
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy.linalg import solve_triangular

LOG_2PI = math.log(2.0 * math.pi)


def _flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() not in ("", "0", "false", "no")


# -- numpy reference implementations --------------------------------------------

def gaussian_log_prob_numpy(X: np.ndarray, means: np.ndarray, chols: np.ndarray) -> np.ndarray:
    n, d = X.shape
    m_count = means.shape[0]
    out = np.empty((n, m_count))
    for m in range(m_count):
        L = chols[m]
        z = solve_triangular(L, (X - means[m]).T, lower=True, check_finite=False)
        log_det = 2.0 * np.sum(np.log(np.diag(L)))
        out[:, m] = -0.5 * (d * LOG_2PI + log_det + np.sum(z * z, axis=0))
    return out


def weighted_covariances_numpy(X: np.ndarray, resp: np.ndarray, nk: np.ndarray, means: np.ndarray) -> np.ndarray:
    m_count, d = means.shape
    cov = np.empty((m_count, d, d))
    for m in range(m_count):
        diff = X - means[m]
        cov[m] = (resp[:, m] * diff.T) @ diff / nk[m]
    return cov


def wlcs_numpy(a: np.ndarray, b: np.ndarray, weight: float) -> float:
    # c: weighted score table, w: length of the consecutive match ending at (i, j)
    n, m = len(a), len(b)
    c = np.zeros((n + 1, m + 1))
    w = np.zeros((n + 1, m + 1), dtype=np.int64)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if a[i - 1] == b[j - 1]:
                k = w[i - 1, j - 1]
                c[i, j] = c[i - 1, j - 1] + (k + 1) ** weight - k ** weight
                w[i, j] = k + 1
            elif c[i - 1, j] > c[i, j - 1]:
                c[i, j] = c[i - 1, j]
            else:
                c[i, j] = c[i, j - 1]
    return float(c[n, m])


NUMPY_KERNELS = {
    "gaussian_log_prob": gaussian_log_prob_numpy,
    "weighted_covariances": weighted_covariances_numpy,
    "wlcs": wlcs_numpy,
}


# -- numba versions -------------------------------------------------------------

try:
    if _flag("DTCRS_DISABLE_NUMBA"):
        raise ImportError("disabled by DTCRS_DISABLE_NUMBA")
    from numba import njit
except ImportError:
    NUMBA_KERNELS: dict = {}
else:
    @njit(cache=True)
    def gaussian_log_prob_numba(X, means, chols):
        n, d = X.shape
        m_count = means.shape[0]
        out = np.empty((n, m_count))
        z = np.empty(d)
        for m in range(m_count):
            L = chols[m]
            log_det = 0.0
            for k in range(d):
                log_det += math.log(L[k, k])
            log_det *= 2.0
            for i in range(n):
                # forward substitution L z = x - mu
                sq = 0.0
                for r in range(d):
                    acc = X[i, r] - means[m, r]
                    for c in range(r):
                        acc -= L[r, c] * z[c]
                    z[r] = acc / L[r, r]
                    sq += z[r] * z[r]
                out[i, m] = -0.5 * (d * LOG_2PI + log_det + sq)
        return out

    @njit(cache=True)
    def weighted_covariances_numba(X, resp, nk, means):
        n, d = X.shape
        m_count = means.shape[0]
        cov = np.zeros((m_count, d, d))
        diff = np.empty(d)
        for m in range(m_count):
            for i in range(n):
                r = resp[i, m]
                for a in range(d):
                    diff[a] = X[i, a] - means[m, a]
                for a in range(d):
                    ra = r * diff[a]
                    for b in range(a + 1):
                        cov[m, a, b] += ra * diff[b]
            for a in range(d):
                for b in range(a + 1):
                    v = cov[m, a, b] / nk[m]
                    cov[m, a, b] = v
                    cov[m, b, a] = v
        return cov

    @njit(cache=True)
    def wlcs_numba(a, b, weight):
        n, m = len(a), len(b)
        c = np.zeros((n + 1, m + 1))
        w = np.zeros((n + 1, m + 1), dtype=np.int64)
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                if a[i - 1] == b[j - 1]:
                    k = w[i - 1, j - 1]
                    c[i, j] = c[i - 1, j - 1] + (k + 1) ** weight - k ** weight
                    w[i, j] = k + 1
                elif c[i - 1, j] > c[i, j - 1]:
                    c[i, j] = c[i - 1, j]
                else:
                    c[i, j] = c[i, j - 1]
        return c[n, m]

    NUMBA_KERNELS = {
        "gaussian_log_prob": gaussian_log_prob_numba,
        "weighted_covariances": weighted_covariances_numba,
        "wlcs": wlcs_numba,
    }


BACKEND = "numba" if NUMBA_KERNELS else "numpy"
_ACTIVE = dict(NUMBA_KERNELS or NUMPY_KERNELS)
# the scatter is two BLAS matmuls per component; the compiled loop only loses (see benchmarks/)
_ACTIVE["weighted_covariances"] = weighted_covariances_numpy


def gaussian_log_prob(X: np.ndarray, means: np.ndarray, chols: np.ndarray) -> np.ndarray:
    return _ACTIVE["gaussian_log_prob"](
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(means, dtype=np.float64),
        np.ascontiguousarray(chols, dtype=np.float64),
    )


def weighted_covariances(X: np.ndarray, resp: np.ndarray, nk: np.ndarray, means: np.ndarray) -> np.ndarray:
    return _ACTIVE["weighted_covariances"](
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(resp, dtype=np.float64),
        np.ascontiguousarray(nk, dtype=np.float64),
        np.ascontiguousarray(means, dtype=np.float64),
    )


def wlcs(a: np.ndarray, b: np.ndarray, weight: float) -> float:
    return float(_ACTIVE["wlcs"](np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64), float(weight)))

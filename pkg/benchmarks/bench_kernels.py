"""Compare the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Both implementations are called directly, so the DTCRS_DISABLE_NUMBA flag
does not matter here. The first numba call (compilation or cache load) is
excluded from the timings.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from dtcrs import _kernels


def _time(fn, args, repeat: int) -> float:
    fn(*args)
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def _gmm_case(n: int, d: int, m: int, rng: np.random.Generator):
    X = rng.standard_normal((n, d))
    means = rng.standard_normal((m, d))
    A = rng.standard_normal((m, d, d))
    covs = A @ A.transpose(0, 2, 1) + d * np.eye(d)
    chols = np.linalg.cholesky(covs)
    resp = rng.dirichlet(np.ones(m), size=n)
    nk = resp.sum(axis=0)
    return X, means, chols, resp, nk


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    if not _kernels.NUMBA_KERNELS:
        raise SystemExit("numba kernels unavailable (numba missing or DTCRS_DISABLE_NUMBA set)")

    rng = np.random.default_rng(0)
    rows = []
    for n, d, m in [(252, 10, 8), (252, 10, 50), (2000, 10, 20)]:
        X, means, chols, resp, nk = _gmm_case(n, d, m, rng)
        label = f"n={n} d={d} M={m}"
        a = (X, means, chols)
        np.testing.assert_allclose(_kernels.NUMBA_KERNELS["gaussian_log_prob"](*a),
                                   _kernels.NUMPY_KERNELS["gaussian_log_prob"](*a), rtol=1e-9, atol=1e-9)
        rows.append(("gaussian_log_prob", label,
                     _time(_kernels.NUMPY_KERNELS["gaussian_log_prob"], a, args.repeat),
                     _time(_kernels.NUMBA_KERNELS["gaussian_log_prob"], a, args.repeat)))
        mu = (resp.T @ X) / nk[:, None]
        b = (X, resp, nk, mu)
        np.testing.assert_allclose(_kernels.NUMBA_KERNELS["weighted_covariances"](*b),
                                   _kernels.NUMPY_KERNELS["weighted_covariances"](*b), rtol=1e-9, atol=1e-9)
        rows.append(("weighted_covariances", label,
                     _time(_kernels.NUMPY_KERNELS["weighted_covariances"], b, args.repeat),
                     _time(_kernels.NUMBA_KERNELS["weighted_covariances"], b, args.repeat)))

    for length in (20, 100):
        a = rng.integers(0, 30, size=length).astype(np.int64)
        b = rng.integers(0, 30, size=length).astype(np.int64)
        c = (a, b, 1.2)
        assert abs(_kernels.NUMBA_KERNELS["wlcs"](*c) - _kernels.NUMPY_KERNELS["wlcs"](*c)) < 1e-9
        rows.append(("wlcs", f"len={length}",
                     _time(_kernels.NUMPY_KERNELS["wlcs"], c, args.repeat),
                     _time(_kernels.NUMBA_KERNELS["wlcs"], c, args.repeat)))

    print(f"{'kernel':<22}{'case':<20}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, label, t_np, t_nb in rows:
        print(f"{name:<22}{label:<20}{1e3 * t_np:>10.3f}{1e3 * t_nb:>10.3f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()

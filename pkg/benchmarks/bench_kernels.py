"""Time the numba kernels against their numpy twins (and LAPACK for eigh).

    python benchmarks/bench_kernels.py --sizes 16 32 64 --repeat 3

Each row reports the best of ``--repeat`` runs after one warm-up call, and
the largest disagreement between the two variants.
"""

import argparse
import time

import numpy as np

from resourcelab import _kernels, quantum


def best_time(fn, repeat):
    fn()  # warm-up (JIT compile, caches)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_jacobi(n, repeat, rng):
    M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    M = M + M.conj().T
    run = {}
    out = {}
    for name, fn in (("numba", _kernels.jacobi_eigh_numba), ("numpy", _kernels.jacobi_eigh_numpy)):
        def call(fn=fn, name=name):
            out[name] = fn(M.copy(), 1e-13, 100)
        run[name] = best_time(call, repeat)
    run["lapack"] = best_time(lambda: np.linalg.eigh(M), repeat)
    diff = np.max(np.abs(np.sort(out["numba"][0]) - np.sort(out["numpy"][0])))
    return run, diff


def bench_mixing(d, repeat, rng):
    rho = quantum.random_density_matrix(d, rng)
    r = min(d, int(np.ceil(np.sqrt(2 * d))) + 1)
    V0 = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    V0 /= np.linalg.norm(V0, axis=1, keepdims=True)
    run = {}
    out = {}
    for name, fn in (("numba", _kernels.mixing_ascent_numba), ("numpy", _kernels.mixing_ascent_numpy)):
        def call(fn=fn, name=name):
            V = V0.copy()
            out[name] = fn(rho, V, 50, 0.0)
        run[name] = best_time(call, repeat)
    diff = abs(out["numba"][0] - out["numpy"][0])
    return run, diff


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<8} {'n':>5} {'numba [s]':>11} {'numpy [s]':>11} {'lapack [s]':>11} {'speedup':>8} {'max diff':>10}")
    for n in args.sizes:
        t, diff = bench_jacobi(n, args.repeat, rng)
        print(f"{'jacobi':<8} {n:>5} {t['numba']:>11.5f} {t['numpy']:>11.5f} {t['lapack']:>11.5f} "
              f"{t['numpy'] / t['numba']:>7.1f}x {diff:>10.1e}")
    for n in args.sizes:
        t, diff = bench_mixing(n, args.repeat, rng)
        print(f"{'mixing':<8} {n:>5} {t['numba']:>11.5f} {t['numpy']:>11.5f} {'-':>11} "
              f"{t['numpy'] / t['numba']:>7.1f}x {diff:>10.1e}")


if __name__ == "__main__":
    main()

"""Time the numba kernels against their numpy counterparts.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

The first numba call (compilation, or loading the on-disk cache) is timed
separately and excluded from the steady-state numbers.
"""
import argparse
import time

import numpy as np

from lrlab import _kernels as K


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    rows = np.sort(rng.random((400, 2000)) * 100, axis=1)
    radii = np.linspace(0, 100, 200)
    yield "ball_counts 400x2000, 200 radii", (rows, radii), K.ball_counts_numpy, K.ball_counts_numba
    k = np.arange(0.0, 200.5, 0.5)
    args = (K.RULE_POWER_LAW, 6.0, 4.0, k, 804.0, 1.0 / 8)
    yield "sup_grid power_law(6), k_max 200", args, K.sup_grid_numpy, K.sup_grid_numba
    vec = rng.standard_normal(2 ** 14) + 1j * rng.standard_normal(2 ** 14)
    mat = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    yield "site_transform 14 qubits", (vec, mat, 14), K.site_transform_numpy, K.site_transform_numba


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    opts = p.parse_args(argv)
    if not K.NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':38s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'first call [ms]':>16s} {'speedup':>8s}")
    for name, args, f_np, f_nb in cases(rng):
        t0 = time.perf_counter()
        out_nb = f_nb(*args)
        first = time.perf_counter() - t0
        out_np = f_np(*args)
        if isinstance(out_np, tuple):
            assert np.allclose(out_np, out_nb, equal_nan=True)
        else:
            assert np.allclose(out_np, out_nb)
        t_np = _best(lambda: f_np(*args), opts.repeat)
        t_nb = _best(lambda: f_nb(*args), opts.repeat)
        print(f"{name:38s} {1e3 * t_np:11.3f} {1e3 * t_nb:11.3f} {1e3 * first:16.1f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()

"""Benchmark the numba kernels against the pure numpy fallback.

Usage: python benchmarks/bench_backends.py [--quick]

Times the three hot paths (periodic-cell chunk, line IMEX chunk, cyclic
tridiagonal solve) on representative sizes and prints per-call timings and
speedups. The numba path is warmed up first so compilation is not billed.
"""

import argparse
import time

import numpy as np

from kppfronts.backends import get_backend


def time_call(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_cell(mod, n, m, reps):
    rng = np.random.default_rng(0)
    a = rng.uniform(0.8, 1.2, (m, n))
    b = rng.uniform(-2.0, 2.0, (m, n))
    r = rng.uniform(0.5, 2.5, (m, n))
    dx, dt = 1.0 / n, 1.0 / m
    eta0 = 1.0 + rng.random(n)

    def run():
        eta = eta0.copy()
        mod.evolve_cell_chunk(eta, a, b, r, dx, dt, m)

    run()
    return time_call(run, reps)


def bench_line(mod, n, m, reps):
    rng = np.random.default_rng(1)
    a = rng.uniform(0.8, 1.2, (1, n))
    b = rng.uniform(-0.3, 0.3, (1, n))
    mu = rng.uniform(0.5, 1.5, (1, n))
    dx, dt = 0.1, 0.004
    u0 = np.clip(np.linspace(1.2, -0.2, n), 0.0, 1.0)

    def run():
        u = u0.copy()
        mod.evolve_line_chunk(u, a, b, mu, dx, dt, m, 1.0, 0.0)

    run()
    return time_call(run, reps)


def bench_cyclic(mod, n, reps):
    rng = np.random.default_rng(2)
    dia = rng.uniform(3.0, 4.0, n)
    sub = rng.uniform(-1.0, -0.1, n)
    sup = rng.uniform(-1.0, -0.1, n)
    rhs = rng.normal(size=n)

    def run():
        for _ in range(100):
            mod.solve_cyclic(sub, dia, sup, rhs)

    run()
    return time_call(run, reps)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true",
                        help="smaller sizes and fewer repeats")
    args = parser.parse_args()
    reps = 3 if args.quick else 7
    cell_n, cell_m = (64, 64) if args.quick else (128, 128)
    line_n, line_m = (1000, 25) if args.quick else (3000, 50)

    numba_mod = get_backend("numba")
    numpy_mod = get_backend("numpy")

    rows = [
        (f"cell chunk  n={cell_n} x {cell_m} steps",
         bench_cell(numba_mod, cell_n, cell_m, reps),
         bench_cell(numpy_mod, cell_n, cell_m, reps)),
        (f"line chunk  n={line_n} x {line_m} steps",
         bench_line(numba_mod, line_n, line_m, reps),
         bench_line(numpy_mod, line_n, line_m, reps)),
        ("cyclic solve n=128 x 100",
         bench_cyclic(numba_mod, 128, reps),
         bench_cyclic(numpy_mod, 128, reps)),
    ]
    width = max(len(r[0]) for r in rows)
    print(f"{'workload':<{width}}  {'numba':>12}  {'numpy':>12}  {'speedup':>8}")
    for name, t_nb, t_np in rows:
        print(f"{name:<{width}}  {t_nb * 1e3:>10.3f}ms  {t_np * 1e3:>10.3f}ms  "
              f"{t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()

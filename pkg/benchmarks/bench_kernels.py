"""Time the compiled and pure-Python partition kernels side by side.

    python3 benchmarks/bench_kernels.py [--max-n 10] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from calibloss._backend import compiled_kernels, python_kernels


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-n", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled_kernels is None:
        print("compiled kernels unavailable; only the Python backend was built")
    rng = np.random.default_rng(0)
    print(f"{'N':>3} {'Bell(N)':>9} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for n in range(4, args.max_n + 1):
        p = rng.dirichlet(np.ones(n))
        t_py = best_of(lambda: python_kernels.coarsen_all(p), args.repeat)
        if compiled_kernels is None:
            print(f"{n:>3} {python_kernels.bell_number(n):>9} {t_py:>10.4f} {'-':>10} {'-':>8}")
            continue
        t_cy = best_of(lambda: compiled_kernels.coarsen_all(p), args.repeat)
        np.testing.assert_allclose(compiled_kernels.coarsen_all(p), python_kernels.coarsen_all(p), atol=1e-15)
        print(f"{n:>3} {compiled_kernels.bell_number(n):>9} {t_py:>10.4f} {t_cy:>10.4f} {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()

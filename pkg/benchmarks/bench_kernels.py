"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--n 500 5000 50000] [--j 6 10] [--repeat 7]

Numba is warmed up once per shape before timing, so the first-call compile
cost is excluded (it is printed separately). Reports the best of --repeat runs.
"""
import argparse
import time

import numpy as np

from amscale import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[500, 5000, 50000])
    ap.add_argument("--j", type=int, nargs="+", default=[6, 10])
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    if not kernels.HAVE_NUMBA:
        print("numba not importable; only the numpy path can be timed")
    rng = np.random.default_rng(0)

    t0 = time.perf_counter()
    if kernels.HAVE_NUMBA:
        kernels.qr_accumulate(rng.normal(size=(4, 3)), 1e-12, use_numba=True)
        kernels.naive_accumulate(rng.normal(size=(4, 3)), use_numba=True)
        kernels.symmetric_eigh(np.eye(3), use_numba=True)
        print(f"numba warm-up (compile or cache load): {time.perf_counter() - t0:.2f} s\n")

    print(f"{'kernel':<18}{'n':>8}{'J':>4}{'numpy ms':>12}{'numba ms':>12}{'speedup':>9}")
    for J in args.j:
        for n in args.n:
            X = rng.normal(size=(n, J)) * rng.uniform(0.5, 2, (n, 1))
            cases = {
                "qr_accumulate": lambda u: kernels.qr_accumulate(X, 1e-12, threads=args.threads,
                                                                 use_numba=u),
                "naive_accumulate": lambda u: kernels.naive_accumulate(X, threads=args.threads,
                                                                       use_numba=u),
            }
            for name, fn in cases.items():
                _report(name, n, J, fn, args.repeat)
        B = rng.normal(size=(J - 1, J - 1))
        B = B + B.T
        _report("symmetric_eigh", 0, J - 1, lambda u: kernels.symmetric_eigh(B, use_numba=u),
                args.repeat * 100)


def _report(name, n, J, fn, repeat):
    t_np = best_of(lambda: fn(False), repeat) * 1e3
    if kernels.HAVE_NUMBA:
        t_nb = best_of(lambda: fn(True), repeat) * 1e3
        print(f"{name:<18}{n or '-':>8}{J:>4}{t_np:>12.3f}{t_nb:>12.3f}{t_np / t_nb:>8.1f}x")
    else:
        print(f"{name:<18}{n or '-':>8}{J:>4}{t_np:>12.3f}{'-':>12}{'-':>9}")


if __name__ == "__main__":
    main()

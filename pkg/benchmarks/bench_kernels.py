"""Compare the compiled kernels with the NumPy fallback.

    python benchmarks/bench_kernels.py --sizes 16 32 64 --repeat 5
"""
import argparse
import time

import numpy as np

from hdqkd import _pykernels, kernels, spectra, witnesses
from hdqkd.completion import PartialRealSymmetric


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def jacobi_case(n, rng):
    a = rng.normal(size=(n, n))
    a = a + a.T
    return lambda mod: mod.jacobi_eigh(a)


def secular_case(n, rng):
    q = witnesses.khexp_preset(n)[0].q
    lam, w = spectra._band_decomposition(tuple(q))
    mu = -0.3 * lam
    return lambda mod: mod.secular_max_root(mu, w)


def completion_case(n, rng):
    r = PartialRealSymmetric(np.full(n, 1.0 / n))
    for k in range(1, n):
        r.set_known(k - 1, k, 0.8 / n)

    def run(mod):
        lo, hi, avail = r.lo.copy(), r.hi.copy(), r.avail.copy()
        for _ in range(n):
            lo, hi, avail, _ = mod.completion_pass(lo, hi, avail, r.known, r.diag, 1e-14)
            if avail.all():
                break

    return run


CASES = {"jacobi": jacobi_case, "secular": secular_case, "completion": completion_case}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if kernels.compiled_backend is None:
        print("compiled extension not built; only the fallback is timed")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<12}{'n':>5}{'compiled [ms]':>16}{'fallback [ms]':>16}{'ratio':>9}")
    for name, make in CASES.items():
        for n in args.sizes:
            case = make(n, rng)
            t_py = best_of(lambda: case(_pykernels), args.repeat)
            if kernels.compiled_backend is not None:
                t_c = best_of(lambda: case(kernels.compiled_backend), args.repeat)
                print(f"{name:<12}{n:>5}{1e3 * t_c:>16.3f}{1e3 * t_py:>16.3f}{t_py / t_c:>9.1f}")
            else:
                print(f"{name:<12}{n:>5}{'-':>16}{1e3 * t_py:>16.3f}{'-':>9}")


if __name__ == "__main__":
    main()

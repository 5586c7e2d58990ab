"""Compare the compiled and pure-Python hot kernels.

Usage: python3 benchmarks/bench_core.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from collisim._core import compiled, fallback
from collisim.numkernel import hessenberg


def _random_kraus(rng, n_ops, dim):
    return rng.normal(size=(n_ops, dim, dim)) + 1j * rng.normal(size=(n_ops, dim, dim))


def _random_density(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def cases(rng):
    # joint system (x) bond states of the collision engine and transfer matrices
    for n_ops, dim in [(3, 4), (9, 6), (12, 8)]:
        kraus, rho = _random_kraus(rng, n_ops, dim), _random_density(rng, dim)
        yield f"kraus_apply ops={n_ops} dim={dim}", "kraus_apply", (kraus, rho)
    for n in [4, 9, 16, 25]:
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        h, q = hessenberg(a)
        yield f"hessenberg_schur n={n}", "hessenberg_schur", (h, q)


def best_time(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if compiled is None:
        print("compiled extension not built; only the fallback is timed")
    rng = np.random.default_rng(0)
    print(f"{'case':<32} {'python [us]':>12} {'cython [us]':>12} {'speedup':>8} {'max diff':>10}")
    for label, name, inputs in cases(rng):
        slow = getattr(fallback, name)
        t_py = best_time(slow, inputs, args.repeat)
        if compiled is None:
            print(f"{label:<32} {t_py * 1e6:12.1f}")
            continue
        fast = getattr(compiled, name)
        t_cy = best_time(fast, inputs, args.repeat)
        a, b = slow(*inputs), fast(*inputs)
        if name == "hessenberg_schur":
            # compare eigenvalues; rotations may differ in rounding
            a, b = np.sort_complex(np.diag(a[0])), np.sort_complex(np.diag(b[0]))
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        print(f"{label:<32} {t_py * 1e6:12.1f} {t_cy * 1e6:12.1f} {t_py / t_cy:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()

"""Compare the compiled and pure-Python Jacobi kernels.

Usage: python benchmarks/bench_eig.py [--repeat R]
"""

import argparse
import timeit

import numpy as np

from mcx import _backend, _pyjacobi

CASES = [(2, 4096), (3, 2048), (8, 256), (16, 32), (32, 4)]


def stack(rng, d, m):
    g = rng.standard_normal((m, d, d)) + 1j * rng.standard_normal((m, d, d))
    return (g + np.conj(np.swapaxes(g, 1, 2))) / 2


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    kernels = {"python": _pyjacobi}
    if "compiled" in _backend.available():
        from mcx import _jacobi
        kernels["compiled"] = _jacobi
    print(f"{'d':>4} {'batch':>6} " + " ".join(f"{k + ' ms':>12}" for k in kernels) + f" {'speedup':>8}")
    for d, m in CASES:
        a = stack(rng, d, m)
        ms = {}
        for name, mod in kernels.items():
            ms[name] = 1e3 * min(timeit.repeat(lambda: mod.eigvalsh_batch(a), number=1, repeat=args.repeat))
        speed = ms["python"] / ms["compiled"] if "compiled" in ms else float("nan")
        print(f"{d:>4} {m:>6} " + " ".join(f"{ms[k]:>12.2f}" for k in kernels) + f" {speed:>8.1f}")


if __name__ == "__main__":
    main()

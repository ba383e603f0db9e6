"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both implementations are imported directly, so the environment switch is
not needed.  Outputs are checked for agreement before timing.
"""
import argparse
import timeit

import numpy as np

from qhboot import _kernels_python as py

try:
    from qhboot import _kernels as cy
except ImportError:
    cy = None


def cases(rng):
    for J in (10, 100, 1000, 10000):
        x = np.sort(rng.uniform(-3, 3, J))
        c = rng.normal(size=J)
        c -= c.mean()
        yield f"bl_chain_value J={J}", "bl_chain_value", (x, c)
    for n, ell, B in ((200, 3, 500), (2000, 5, 1000), (20000, 8, 200)):
        starts = rng.integers(1, n + 1, size=(B, n // ell))
        yield f"circular_counts n={n} ell={ell} B={B}", "circular_counts", (starts, n, ell)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if cy is None:
        print("compiled extension not built; nothing to compare")
        return
    rng = np.random.default_rng(args.seed)
    print(f"{'case':<40}{'python [ms]':>14}{'compiled [ms]':>15}{'speedup':>10}")
    for label, name, argv in cases(rng):
        f_py, f_cy = getattr(py, name), getattr(cy, name)
        np.testing.assert_allclose(f_py(*argv), f_cy(*argv), rtol=1e-12, atol=1e-12)
        t_py = min(timeit.repeat(lambda: f_py(*argv), number=1, repeat=args.repeat))
        t_cy = min(timeit.repeat(lambda: f_cy(*argv), number=1, repeat=args.repeat))
        print(f"{label:<40}{1e3 * t_py:>14.3f}{1e3 * t_cy:>15.3f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()

"""Time the compiled kernels against the pure-Python fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Each row
reports the best wall time per backend and the speedup.
"""
import argparse
import timeit

import numpy as np

from resolventlab.kernels import TridiagonalLU, compensated_sum, eigh_tridiagonal, get_backend


def _system(n, rng):
    h = 1.0 / n
    diag = 2.0 / h**2 + rng.uniform(0.0, 1.0, n) + 0.1j
    off = np.full(n - 1, -1.0 / h**2, dtype=np.complex128)
    return off, diag, off.copy(), rng.normal(size=n) + 1j * rng.normal(size=n)


def cases(rng):
    for n in (1000, 8000, 64000):
        lo, d, up, b = _system(n, rng)
        yield f"factor+solve n={n}", lambda be, lo=lo, d=d, up=up, b=b: TridiagonalLU(lo, d, up, be).solve(b)
    lo, d, up, _ = _system(8000, rng)
    B = rng.normal(size=(8000, 20)) + 0j
    lu = {be: TridiagonalLU(lo, d, up, be) for be in ("compiled", "python")}
    yield "solve 20 rhs n=8000", lambda be: lu[be].solve(B)
    for n in (200, 800):
        diag = 2.0 + rng.uniform(0.0, 0.1, n)
        off = -np.ones(n - 1)
        yield f"eigh n={n}", lambda be, diag=diag, off=off: eigh_tridiagonal(diag, off, backend=be)
    x = rng.normal(size=10**6)
    yield "compensated sum 1e6", lambda be: compensated_sum(x, backend=be)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    try:
        get_backend("compiled")
    except ImportError:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(0)
    print(f"{'case':<26}{'compiled [s]':>14}{'python [s]':>14}{'speedup':>10}")
    for name, fn in cases(rng):
        t = {be: min(timeit.repeat(lambda: fn(be), number=1, repeat=args.repeat)) for be in ("compiled", "python")}
        print(f"{name:<26}{t['compiled']:>14.4g}{t['python']:>14.4g}{t['python'] / t['compiled']:>10.1f}")


if __name__ == "__main__":
    main()

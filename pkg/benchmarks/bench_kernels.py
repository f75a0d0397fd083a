"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints best-of-N wall time per kernel for both backends, the speed-up, and
the largest absolute difference between their outputs.
"""

import argparse
import time

import numpy as np

from adaptsde import _pykernels

try:
    from adaptsde import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases():
    n, d = 8192, 64
    streams = np.arange(n, dtype=np.uint64)
    counters = np.full(n, 7, dtype=np.uint64)
    rng = np.random.default_rng(0)
    a = rng.standard_normal((n, d))
    b = a + 1e-3 * rng.standard_normal((n, d))
    c = rng.standard_normal((n, d))
    return [
        ("normals 8192x64", lambda k: k.normals(42, streams, counters, d)),
        ("signs 8192", lambda k: k.signs(42, streams, counters)),
        ("scaled_error l2 8192x64", lambda k: k.scaled_error(a, b, c, 0.0078125, 0.01, False)),
        ("scaled_error linf 8192x64", lambda k: k.scaled_error(a, b, c, 0.0078125, 0.01, True)),
        ("linear paths 2000x1000", lambda k: k.linear_scheme_paths(0.9, 0.316, 1.0, 2000, 1000, 3, 2)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return
    print(f"{'kernel':28s} {'python s':>10s} {'cython s':>10s} {'speed-up':>9s} {'max |diff|':>11s}")
    for name, fn in cases():
        tp, op = best_of(lambda: fn(_pykernels), args.repeat)
        tc, oc = best_of(lambda: fn(_ckernels), args.repeat)
        diff = float(np.max(np.abs(np.asarray(op, dtype=float) - np.asarray(oc, dtype=float))))
        print(f"{name:28s} {tp:10.4f} {tc:10.4f} {tp / tc:8.1f}x {diff:11.2e}")


if __name__ == "__main__":
    main()

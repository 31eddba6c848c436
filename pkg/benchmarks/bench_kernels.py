"""Time the numba and numpy kernel backends on identical inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size small|large]

Numba compilation is triggered once before timing.  Each row reports the
best-of-``repeat`` wall time per call and the max-abs difference between the
two backends' outputs.
"""

import argparse
import timeit

import numpy as np

from markovflow._kernels import _numba, _numpy
from markovflow.fixtures import Lcg, rate_matrix

SIZES = {
    "small": {"batch": 256, "d": 4, "n_int": 8, "n_sub": 64, "steps": 2000},
    "large": {"batch": 4096, "d": 6, "n_int": 32, "n_sub": 256, "steps": 20000},
}


def _inputs(size):
    p = SIZES[size]
    rng = Lcg(7)
    d = p["d"]
    mats = np.array([rate_matrix(rng, d, 0.5) for _ in range(p["batch"])])
    Q = rate_matrix(rng, d, 1.0 / (d - 1))
    n_int, n_sub = p["n_int"], p["n_sub"]
    h = np.full(n_int, 1.0 / n_sub)
    nodes = np.linspace(0.0, n_int, n_int * n_sub + 1)
    y = np.stack([np.sin(nodes), np.cos(2.0 * nodes), nodes**2], axis=-1)
    y = np.stack([y[i * n_sub : (i + 1) * n_sub + 1] for i in range(n_int)])
    scale = (1.0 + 0.2 * np.sin(np.arange(n_int * (n_sub + 1)))).reshape(n_int, n_sub + 1, 1, 1)
    A = np.ascontiguousarray(scale * Q)
    steps = p["steps"]
    Qs = np.ascontiguousarray(np.broadcast_to(Q, (steps, 3, d, d)))
    hs = np.full(steps, 1e-3)
    return {
        "expm_batch": (mats,),
        "cumsimpson": (np.ascontiguousarray(y), h),
        "rk4_propagate": (np.eye(d), Qs, hs),
        "pbs_series": (A, h, 1e-14, 200),
    }


def _first(out):
    return out[0] if isinstance(out, tuple) else out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", choices=sorted(SIZES), default="small")
    args = ap.parse_args(argv)

    print(f"{'kernel':<14} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8} {'max diff':>9}")
    for name, call_args in _inputs(args.size).items():
        fn_np, fn_nb = getattr(_numpy, name), getattr(_numba, name)
        ref, got = _first(fn_np(*call_args)), _first(fn_nb(*call_args))
        diff = float(np.abs(ref - got).max())
        t_np = min(timeit.repeat(lambda: fn_np(*call_args), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: fn_nb(*call_args), number=1, repeat=args.repeat))
        print(f"{name:<14} {1e3 * t_np:>11.3f} {1e3 * t_nb:>11.3f} {t_np / t_nb:>7.1f}x {diff:>9.1e}")


if __name__ == "__main__":
    main()

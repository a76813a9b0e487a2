"""Time the numba kernels against their plain numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from cfrobust import NUMBA_ENABLED
from cfrobust.models.glvq import glvq_epoch
from cfrobust.optim.lp import dual_simplex_kernel
from cfrobust.optim.qp import gi_kernel


def _qp_case(rng, d=20, m=40):
    A = rng.normal(size=(m, d))
    b = A @ rng.normal(size=d) + rng.uniform(0.1, 1.0, m)
    return np.eye(d), -rng.normal(size=d) * 3, A, b


def cases(rng):
    H, g, A, b = _qp_case(rng)
    r = np.ascontiguousarray(b - A @ (rng.normal(size=20) * 3))
    X = rng.normal(size=(500, 10))
    y = (X[:, 0] > 0).astype(np.int64)
    protos = rng.normal(size=(6, 10))
    plabels = np.array([0, 0, 0, 1, 1, 1], dtype=np.int64)
    order = rng.permutation(500).astype(np.int64)
    return {
        "gi_kernel (d=20, m=40)": (gi_kernel, (H, g, A, b, 1e-9, 1000)),
        "dual_simplex_kernel (d=20, m=40)": (dual_simplex_kernel, (A, r, np.ones(20), 1e-9, 1000)),
        "glvq_epoch (n=500, d=10)": (glvq_epoch, (X, y, protos, plabels, order, 0.05)),
    }


def timeit(fn, args, repeat):
    fn(*[a.copy() if isinstance(a, np.ndarray) else a for a in args])
    best = np.inf
    for _ in range(repeat):
        fresh = [a.copy() if isinstance(a, np.ndarray) else a for a in args]
        t = time.perf_counter()
        fn(*fresh)
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    print(f"numba enabled: {NUMBA_ENABLED}")
    print(f"{'kernel':<36}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, (kernel, kargs) in cases(np.random.default_rng(0)).items():
        fast = timeit(kernel, kargs, args.repeat)
        slow = timeit(kernel.py_func, kargs, max(1, args.repeat // 4))
        print(f"{name:<36}{fast * 1e3:>12.3f}{slow * 1e3:>12.3f}{slow / fast:>10.1f}")


if __name__ == "__main__":
    main()

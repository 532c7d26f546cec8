"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--n 1000] [--dim 784] [--repeat 3]

The first numba call (compilation) is excluded from the timings. Results
are checked for agreement before anything is printed.
"""

import argparse
import time

import numpy as np

from einsteindr import _accel


def _best(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(n, dim, k, seed=0):
    rng = np.random.default_rng(seed)
    S = rng.random((n, dim))
    T = rng.random((n // 4, dim))
    D = _accel.numpy_impl.sq_dists(S)
    nbrs = _accel.numpy_impl.knn_select(D, k, True)
    return {
        "sq_dists": (S,),
        "cross_sq_dists": (T, S),
        "knn_select": (D, k, True),
        "local_weights": (S, S, nbrs, 1e-3, 1e12),
        "nearest": (S, T),
    }


def _close(a, b):
    if isinstance(a, tuple):
        return all(_close(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-9, atol=1e-9)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--dim", type=int, default=784)
    ap.add_argument("--k", type=int, default=7)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _accel.numba_impl is None:
        print("numba is not available; nothing to compare")
        return 1
    print(f"n={args.n} dim={args.dim} k={args.k} (best of {args.repeat})")
    print(f"{'kernel':<16}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}")
    for name, a in cases(args.n, args.dim, args.k).items():
        f_np = getattr(_accel.numpy_impl, name)
        f_nb = getattr(_accel.numba_impl, name)
        f_nb(*a)  # compile
        t_np, r_np = _best(f_np, a, args.repeat)
        t_nb, r_nb = _best(f_nb, a, args.repeat)
        if not _close(r_np, r_nb):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<16}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

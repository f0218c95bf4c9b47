"""Benchmark the numba kernels against their pure-numpy twins.

Run:  python3 benchmarks/kernel_bench.py [--rows 2000] [--features 30] [--reps 5]

The same kernels power the boosted-trees classifier and the k-means metric;
SYNTHTRIALS_NO_NUMBA=1 switches the package itself onto the numpy path.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from synthtrials._kernels import boosting_nb, boosting_np, kmeans_nb, kmeans_np


def tree_problem(n, m, seed):
    rng = np.random.default_rng(seed)
    X = np.ascontiguousarray(rng.normal(size=(n, m)))
    p = 1.0 / (1.0 + np.exp(-X[:, 0] + 0.5 * X[:, 1]))
    y = (rng.random(n) < p).astype(np.float64)
    return X, np.ascontiguousarray(p - y), np.ascontiguousarray(np.maximum(p * (1 - p), 1e-12))


def kmeans_problem(n, d, k, seed):
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=4.0, size=(k, d))
    X = np.ascontiguousarray(centers[rng.integers(k, size=n)] + rng.normal(size=(n, d)))
    init = np.ascontiguousarray(X[rng.choice(n, size=k, replace=False)])
    return X, init


def timeit(fn, reps):
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--rows", type=int, default=2000)
    parser.add_argument("--features", type=int, default=30)
    parser.add_argument("--reps", type=int, default=5)
    args = parser.parse_args()

    X, g, h = tree_problem(args.rows, args.features, seed=0)
    # warm the JIT before timing
    boosting_nb.build_tree(X[:50], g[:50], h[:50], 3, 5, 1e-3)

    tree_np = lambda: boosting_np.build_tree(X, g, h, 6, 5, 1e-3)  # noqa: E731
    tree_nb = lambda: boosting_nb.build_tree(X, g, h, 6, 5, 1e-3)  # noqa: E731
    t_np = timeit(tree_np, args.reps)
    t_nb = timeit(tree_nb, args.reps)
    print(f"build_tree  {args.rows}x{args.features} depth=6")
    print(f"  numpy: {t_np * 1e3:8.2f} ms")
    print(f"  numba: {t_nb * 1e3:8.2f} ms   ({t_np / t_nb:5.1f}x)")

    tree = boosting_np.build_tree(X, g, h, 6, 5, 1e-3)
    apply_np = lambda: boosting_np.tree_apply(*tree, X)  # noqa: E731
    apply_nb = lambda: boosting_nb.tree_apply(*tree, X)  # noqa: E731
    boosting_nb.tree_apply(*tree, X[:50])
    t_np = timeit(apply_np, args.reps)
    t_nb = timeit(apply_nb, args.reps)
    print("tree_apply")
    print(f"  numpy: {t_np * 1e3:8.2f} ms")
    print(f"  numba: {t_nb * 1e3:8.2f} ms   ({t_np / t_nb:5.1f}x)")

    Xk, init = kmeans_problem(args.rows, 40, 10, seed=1)
    kmeans_nb.lloyd(Xk[:100], init, 5)
    lloyd_np = lambda: kmeans_np.lloyd(Xk, init, 300)  # noqa: E731
    lloyd_nb = lambda: kmeans_nb.lloyd(Xk, init, 300)  # noqa: E731
    t_np = timeit(lloyd_np, args.reps)
    t_nb = timeit(lloyd_nb, args.reps)
    print(f"lloyd  {args.rows}x40 k=10")
    print(f"  numpy: {t_np * 1e3:8.2f} ms")
    print(f"  numba: {t_nb * 1e3:8.2f} ms   ({t_np / t_nb:5.1f}x)")

    inertia_np = kmeans_np.lloyd(Xk, init, 300)[2]
    inertia_nb = kmeans_nb.lloyd(Xk, init, 300)[2]
    print(f"lloyd inertia agreement: numpy {inertia_np:.6f} vs numba {inertia_nb:.6f}")


if __name__ == "__main__":
    main()

"""Compare the compiled and pure-numpy variants of the hot kernels.

Run:  python3 benchmarks/bench_kernels.py
The numpy fallback is also what SOUNDFAULT_NO_NUMBA=1 selects at import time.
"""

import time

import numpy as np

from soundfault import _kernels


def _best_of(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    rng = np.random.default_rng(0)
    x = rng.normal(0, 1, (800, 32))
    y = rng.normal(0, 1, (400, 32))
    embedding = rng.normal(0, 1, (500, 2))
    p_joint = rng.random((500, 500))
    p_joint = (p_joint + p_joint.T) / p_joint.sum()
    np.fill_diagonal(p_joint, 0.0)

    variants = [("numpy", _kernels._pairwise_minkowski_np, _kernels._tsne_grad_np)]
    if _kernels.USING_NUMBA:
        variants.append(("numba", _kernels.pairwise_minkowski, _kernels.tsne_grad))
        # trigger compilation outside the timed region
        _kernels.pairwise_minkowski(x[:4], y[:4], 2.0)
        _kernels.tsne_grad(embedding[:8], np.ascontiguousarray(p_joint[:8, :8]))
    else:
        print("numba unavailable or disabled; benchmarking numpy only")

    print(f"{'kernel':<28}{'variant':<10}{'best of 5':>12}")
    for name, pairwise, grad in variants:
        for p in (1.0, 2.0, 3.0):
            t = _best_of(lambda: pairwise(x, y, p))
            print(f"{'pairwise_minkowski p=' + str(p):<28}{name:<10}{t * 1e3:>10.2f}ms")
        t = _best_of(lambda: grad(embedding, p_joint))
        print(f"{'tsne_grad N=500':<28}{name:<10}{t * 1e3:>10.2f}ms")


if __name__ == "__main__":
    main()

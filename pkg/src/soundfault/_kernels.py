"""Hot numeric kernels with two interchangeable backends.

The numba backend JIT-compiles the O(N*M*D) pairwise-distance loop and
the O(N^2) embedding-force loop. Setting the environment variable
``SOUNDFAULT_NO_NUMBA=1`` (or running without numba installed) selects
the pure-numpy implementations instead; both backends compute the same
quantities and the test suite runs against whichever is active.

``benchmarks/bench_kernels.py`` times the two backends side by side.
"""

import os

import numpy as np

_EPS = 1e-12


# ---------------------------------------------------------------- numpy

def _pairwise_minkowski_np(x, y, p):
    if p == 2.0:
        sq = (
            np.sum(x * x, axis=1)[:, None]
            + np.sum(y * y, axis=1)[None, :]
            - 2.0 * (x @ y.T)
        )
        return np.sqrt(np.maximum(sq, 0.0))
    diff = np.abs(x[:, None, :] - y[None, :, :])
    return np.sum(diff**p, axis=2) ** (1.0 / p)


def _tsne_grad_np(embedding, p_joint):
    d_sq = _pairwise_minkowski_np(embedding, embedding, 2.0) ** 2
    num = 1.0 / (1.0 + d_sq)
    np.fill_diagonal(num, 0.0)
    num_sum = max(num.sum(), _EPS)
    q_joint = np.maximum(num / num_sum, _EPS)
    pq_num = (p_joint - q_joint) * num
    grad = 4.0 * (np.diag(pq_num.sum(axis=1)) @ embedding - pq_num @ embedding)
    mask = p_joint > _EPS
    kl = float(np.sum(p_joint[mask] * np.log(p_joint[mask] / q_joint[mask])))
    return grad, kl


# ---------------------------------------------------------------- numba

def _build_numba():
    from numba import njit

    @njit(cache=True)
    def pairwise_minkowski(x, y, p):
        n, d = x.shape
        m = y.shape[0]
        out = np.empty((n, m))
        for i in range(n):
            for j in range(m):
                acc = 0.0
                if p == 2.0:
                    for k in range(d):
                        diff = x[i, k] - y[j, k]
                        acc += diff * diff
                    out[i, j] = np.sqrt(acc)
                else:
                    for k in range(d):
                        acc += np.abs(x[i, k] - y[j, k]) ** p
                    out[i, j] = acc ** (1.0 / p)
        return out

    @njit(cache=True)
    def tsne_grad(embedding, p_joint):
        n = embedding.shape[0]
        num = np.zeros((n, n))
        num_sum = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                d_sq = 0.0
                for k in range(embedding.shape[1]):
                    diff = embedding[i, k] - embedding[j, k]
                    d_sq += diff * diff
                v = 1.0 / (1.0 + d_sq)
                num[i, j] = v
                num[j, i] = v
                num_sum += 2.0 * v
        if num_sum < _EPS:
            num_sum = _EPS
        grad = np.zeros_like(embedding)
        kl = 0.0
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                q = num[i, j] / num_sum
                if q < _EPS:
                    q = _EPS
                w = 4.0 * (p_joint[i, j] - q) * num[i, j]
                for k in range(embedding.shape[1]):
                    grad[i, k] += w * (embedding[i, k] - embedding[j, k])
                if p_joint[i, j] > _EPS:
                    kl += p_joint[i, j] * np.log(p_joint[i, j] / q)
        return grad, kl

    return pairwise_minkowski, tsne_grad


USING_NUMBA = False

if os.environ.get("SOUNDFAULT_NO_NUMBA", "") not in ("1", "true", "yes"):
    try:
        pairwise_minkowski, tsne_grad = _build_numba()
        USING_NUMBA = True
    except ImportError:
        pass

if not USING_NUMBA:
    pairwise_minkowski = _pairwise_minkowski_np
    tsne_grad = _tsne_grad_np

"""Interpretability computations: mean attention distance and exact t-SNE.

Attention tensors come from files (the transformer itself is not hosted
here); t-SNE is the exact O(N^2) algorithm with per-point bandwidth found
by bisection against the target perplexity.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError, InputError, NumericError, ShapeError

_P_FLOOR = float(np.finfo(np.float64).eps)


# ------------------------------------------------------ attention distance

@dataclass
class AttentionTensor:
    weights: np.ndarray        # [heads, tokens, tokens], rows stochastic
    grid: tuple                # (rows, cols) patch layout
    patch_pitch: tuple         # (vertical, horizontal) pixels between centers
    n_special: int = 2         # non-patch tokens at the sequence front
    label: str = ""

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 3 or self.weights.shape[1] != self.weights.shape[2]:
            raise ShapeError("attention weights must be [heads, tokens, tokens]")
        rows, cols = self.grid
        if self.n_special + rows * cols != self.weights.shape[1]:
            raise ShapeError(
                f"token count {self.weights.shape[1]} != "
                f"{self.n_special} special + {rows}x{cols} patches"
            )


def patch_centers(grid, patch_pitch):
    """Pixel centers of a row-major patch grid."""
    rows, cols = grid
    pv, ph = patch_pitch
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    return np.stack([r.ravel() * pv, c.ravel() * ph], axis=1).astype(np.float64)


def mean_attention_distance(attn):
    """Attention-weighted mean pixel distance per head.

    Special tokens are dropped and each remaining row renormalized; each
    head's value is the plain mean over patch queries of the expected
    center-to-center distance.
    """
    row_sums = attn.weights.sum(axis=2)
    if np.any(np.abs(row_sums - 1.0) > 1e-6):
        raise NumericError("attention rows are not stochastic (sum != 1)")

    s = attn.n_special
    w = attn.weights[:, s:, s:].copy()
    norms = w.sum(axis=2, keepdims=True)
    if np.any(norms <= 0.0):
        raise NumericError("a patch row has zero mass outside special tokens")
    w /= norms

    centers = patch_centers(attn.grid, attn.patch_pitch)
    diffs = centers[:, None, :] - centers[None, :, :]
    dist = np.sqrt((diffs**2).sum(axis=2))
    per_query = (w * dist[None, :, :]).sum(axis=2)
    return per_query.mean(axis=1)


_ATTN_MAGIC = b"SFAT"


def attention_to_bytes(attn):
    h, t, _ = attn.weights.shape
    head = _ATTN_MAGIC + struct.pack("<BIII", 1, h, t, t)
    return head + attn.weights.astype("<f4").tobytes()


def attention_meta(attn):
    return {
        "grid_rows": attn.grid[0],
        "grid_cols": attn.grid[1],
        "pitch_v": attn.patch_pitch[0],
        "pitch_h": attn.patch_pitch[1],
        "n_special": attn.n_special,
        "label": attn.label,
    }


def attention_from_bytes(payload, meta):
    if payload[:4] != _ATTN_MAGIC:
        raise InputError("not an attention container")
    _, h, t1, t2 = struct.unpack("<BIII", payload[4:17])
    weights = np.frombuffer(payload[17:], dtype="<f4").reshape(h, t1, t2)
    return AttentionTensor(
        weights=weights.astype(np.float64),
        grid=(int(meta["grid_rows"]), int(meta["grid_cols"])),
        patch_pitch=(float(meta["pitch_v"]), float(meta["pitch_h"])),
        n_special=int(meta["n_special"]),
        label=str(meta.get("label", "")),
    )


# ------------------------------------------------------------------- t-SNE

@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.perplexity <= 1.0:
            raise ConfigurationError("perplexity must be > 1")
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")


def _conditional_probs(sq_dists, perplexity, tol=1e-5, max_iter=200):
    """Per-point Gaussian affinities with entropy matched to log(perplexity)."""
    n = sq_dists.shape[0]
    target = np.log(perplexity)
    p_cond = np.zeros((n, n))
    for i in range(n):
        d = np.delete(sq_dists[i], i)
        beta, beta_lo, beta_hi = 1.0, 0.0, np.inf
        p = np.ones_like(d) / d.size
        for _ in range(max_iter):
            w = np.exp(-beta * (d - d.min()))
            sum_w = w.sum()
            p = w / sum_w
            # H = log(sum w) + beta * <d>, in shifted coordinates
            entropy = np.log(sum_w) + beta * np.sum((d - d.min()) * p)
            diff = entropy - target
            if abs(diff) < tol:
                break
            if diff > 0:  # entropy too high -> sharpen
                beta_lo = beta
                beta = beta * 2.0 if np.isinf(beta_hi) else (beta + beta_hi) / 2.0
            else:
                beta_hi = beta
                beta = (beta + beta_lo) / 2.0
        p_cond[i, np.arange(n) != i] = p
    return p_cond


def joint_probabilities(points, perplexity):
    """Symmetrized, normalized affinity matrix P."""
    x = np.asarray(points, dtype=np.float64)
    sq = _kernels.pairwise_minkowski(x, x, 2.0) ** 2
    if np.allclose(sq, 0.0):
        # all points coincident: fall back to the uniform distribution
        n = x.shape[0]
        p = np.full((n, n), 1.0 / (n * (n - 1)))
        np.fill_diagonal(p, 0.0)
        return p
    p_cond = _conditional_probs(sq, perplexity)
    p = (p_cond + p_cond.T) / (2.0 * x.shape[0])
    return np.maximum(p, _P_FLOOR)


def tsne(points, cfg=TsneConfig()):
    """Exact t-SNE to 2-D; returns (coordinates [N, 2], KL trace).

    The KL trace is always measured against the un-exaggerated P.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 4:
        raise ConfigurationError("need at least 4 points in a 2D array")
    if not np.all(np.isfinite(x)):
        raise InputError("non-finite t-SNE inputs")
    n = x.shape[0]
    if cfg.perplexity >= n:
        raise ConfigurationError(f"perplexity {cfg.perplexity} >= N={n}")

    p = joint_probabilities(x, cfg.perplexity)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    y = rng.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)

    kl_trace = []
    for it in range(cfg.iterations):
        exaggerating = it < cfg.exaggeration_iters
        p_eff = p * cfg.early_exaggeration if exaggerating else p
        grad, kl = _kernels.tsne_grad(y, p_eff)
        if exaggerating:
            _, kl = _kernels.tsne_grad(y, p)
        kl_trace.append(kl)

        momentum = (
            cfg.momentum_start if it < cfg.exaggeration_iters else cfg.momentum_final
        )
        same_sign = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, 0.01)
        velocity = momentum * velocity - cfg.learning_rate * gains * grad
        y = y + velocity
        y = y - y.mean(axis=0)
    return y, np.array(kl_trace)

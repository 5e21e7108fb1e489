"""Local Outlier Factor, written out from the definition.

Novelty-style scoring: queries are compared against the fitted training
set and are never their own neighbors. Binary decisions come from a
majority vote over several contamination-level thresholds; continuous
scores feed AUC evaluation directly.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InsufficientDataError, ShapeError

LRD_FLOOR = 1e-12
DEFAULT_CONTAMINATION_LEVELS = (0.1, 0.2, 0.3, 0.4)


@dataclass
class LofModel:
    train_points: np.ndarray  # [N, D]
    k: int
    p: float                  # Minkowski order
    k_distance: np.ndarray    # [N]
    lrd: np.ndarray           # [N] local reachability density
    train_scores: np.ndarray  # [N] LOF of each training point


@dataclass(frozen=True)
class VoteConfig:
    contamination_levels: tuple = DEFAULT_CONTAMINATION_LEVELS

    def __post_init__(self):
        if not self.contamination_levels:
            raise ShapeError("need at least one contamination level")
        for c in self.contamination_levels:
            if not 0.0 < c <= 0.5:
                raise ShapeError(f"contamination level {c} outside (0, 0.5]")


def _neighborhoods(dists, k):
    """Per row: (k-distance, neighbor mask). Ties at the k-distance are all kept."""
    kdist = np.sort(dists, axis=1)[:, k - 1]
    mask = dists <= kdist[:, None]
    return kdist, mask


def fit_lof(train_points, k=4, p=2.0):
    """Fit LOF: per-point k-distance, lrd and LOF score over the train set."""
    x = np.asarray(train_points, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("train points must be 2D [N, D]")
    n = x.shape[0]
    if n <= k:
        raise InsufficientDataError(f"need more than k={k} points, got {n}")
    if not np.all(np.isfinite(x)):
        raise ShapeError("non-finite training points")

    dists = _kernels.pairwise_minkowski(x, x, float(p))
    np.fill_diagonal(dists, np.inf)  # a point is not its own neighbor
    kdist, mask = _neighborhoods(dists, k)

    # lrd_a = 1 / mean_b max(k-distance(b), d(a, b)) over a's neighbors b
    reach = np.maximum(kdist[None, :], dists)
    lrd = np.empty(n)
    for i in range(n):
        nb = mask[i]
        lrd[i] = 1.0 / max(reach[i, nb].mean(), LRD_FLOOR)

    scores = np.empty(n)
    for i in range(n):
        nb = mask[i]
        scores[i] = np.mean(lrd[nb]) / lrd[i]

    return LofModel(
        train_points=x, k=k, p=float(p),
        k_distance=kdist, lrd=lrd, train_scores=scores,
    )


def score_lof(model, query_points):
    """LOF scores of queries against the training set; higher = more anomalous."""
    q = np.asarray(query_points, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != model.train_points.shape[1]:
        raise ShapeError(
            f"query dim mismatch: got {q.shape}, "
            f"train dim {model.train_points.shape[1]}"
        )
    dists = _kernels.pairwise_minkowski(q, model.train_points, model.p)
    kdist_q, mask = _neighborhoods(dists, model.k)
    reach = np.maximum(model.k_distance[None, :], dists)

    scores = np.empty(q.shape[0])
    for i in range(q.shape[0]):
        nb = mask[i]
        lrd_q = 1.0 / max(reach[i, nb].mean(), LRD_FLOOR)
        scores[i] = np.mean(model.lrd[nb]) / lrd_q
    return scores


def model_to_bytes(model):
    import io

    buf = io.BytesIO()
    np.savez(
        buf,
        train_points=model.train_points,
        k=np.int64(model.k),
        p=np.float64(model.p),
        k_distance=model.k_distance,
        lrd=model.lrd,
        train_scores=model.train_scores,
    )
    return buf.getvalue()


def model_from_bytes(payload):
    import io

    with np.load(io.BytesIO(payload)) as data:
        return LofModel(
            train_points=data["train_points"],
            k=int(data["k"]),
            p=float(data["p"]),
            k_distance=data["k_distance"],
            lrd=data["lrd"],
            train_scores=data["train_scores"],
        )


def predict_vote(train_scores, query_scores, votes=VoteConfig()):
    """Majority vote over contamination-level thresholds.

    For each level c the threshold is the (1-c) quantile of the training
    scores; a query is flagged when its score exceeds the threshold.
    An exact tie in the vote resolves to anomalous.
    """
    train_scores = np.asarray(train_scores, dtype=np.float64)
    if train_scores.size == 0:
        raise InsufficientDataError("empty training scores")
    query_scores = np.asarray(query_scores, dtype=np.float64)
    levels = votes.contamination_levels
    thresholds = np.quantile(train_scores, [1.0 - c for c in levels])
    flags = query_scores[:, None] > thresholds[None, :]
    return (2 * flags.sum(axis=1) >= len(levels)).astype(np.int64)

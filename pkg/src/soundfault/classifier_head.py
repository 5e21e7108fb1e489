"""Supervised detection head over precomputed embeddings.

Head: in_dim -> 256 dense, dropout(0.1), ReLU, 256 -> 1 dense. Trained
with BCE-with-logits for one epoch by default. Embeddings arrive through
a plain CSV interchange format so externally produced backbone embeddings
can be scored without hosting the backbones.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import neural
from .errors import DegenerateLabelsError, InputError, ShapeError

LABEL_NORMAL = "normal"
LABEL_ANOMALOUS = "anomalous"
LABEL_UNLABELED = "unlabeled"

# on-disk spelling in embedding files
_FILE_LABELS = {LABEL_NORMAL: "normal", LABEL_ANOMALOUS: "anomaly",
                LABEL_UNLABELED: "unlabeled"}
_READ_LABELS = {"normal": LABEL_NORMAL, "anomaly": LABEL_ANOMALOUS,
                "anomalous": LABEL_ANOMALOUS, "unlabeled": LABEL_UNLABELED}


@dataclass
class EmbeddingSet:
    vectors: np.ndarray  # [N, D]
    clip_ids: list
    labels: list  # values in {normal, anomalous, unlabeled}
    source_tag: str = ""

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ShapeError("embedding vectors must be 2D [N, D]")
        n = self.vectors.shape[0]
        if len(self.clip_ids) != n or len(self.labels) != n:
            raise ShapeError("clip_ids/labels length must match vector count")
        if not np.all(np.isfinite(self.vectors)):
            raise InputError("non-finite embedding values")

    @property
    def dim(self):
        return self.vectors.shape[1]

    def binary_labels(self):
        """0/1 array over labeled rows plus the row mask."""
        mask = np.array([l != LABEL_UNLABELED for l in self.labels])
        y = np.array(
            [1.0 if l == LABEL_ANOMALOUS else 0.0 for l in self.labels]
        )
        return y[mask], mask


def write_embeddings(path, embeddings):
    with open(str(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        dim = embeddings.dim
        writer.writerow(["clip_id", "label"] + [f"e{i}" for i in range(dim)])
        for cid, label, vec in zip(
            embeddings.clip_ids, embeddings.labels, embeddings.vectors
        ):
            writer.writerow([cid, _FILE_LABELS[label]] + [repr(float(v)) for v in vec])


def read_embeddings(path, source_tag=""):
    with open(str(path), newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty embedding file") from None
        if header[:2] != ["clip_id", "label"]:
            raise InputError(f"{path}: expected header clip_id,label,e0,...")
        ids, labels, rows = [], [], []
        for row in reader:
            if not row:
                continue
            if row[1] not in _READ_LABELS:
                raise InputError(f"{path}: unknown label {row[1]!r}")
            ids.append(row[0])
            labels.append(_READ_LABELS[row[1]])
            rows.append([float(v) for v in row[2:]])
    if not rows:
        raise InputError(f"{path}: no embedding rows")
    return EmbeddingSet(
        vectors=np.array(rows), clip_ids=ids, labels=labels, source_tag=source_tag
    )


# ------------------------------------------------------------------- model

def build_head(in_dim, seed=0, backbone_lr_multiplier=1.0):
    """in_dim -> 256 -> dropout -> ReLU -> 1, in the fixed order."""
    if in_dim < 1:
        raise ShapeError("in_dim must be >= 1")
    rng = neural.make_rng(seed)
    return neural.Network([
        neural.Dense(in_dim, 256, rng=rng, lr_multiplier=backbone_lr_multiplier),
        neural.Dropout(0.1),
        neural.ReLU(),
        neural.Dense(256, 1, rng=rng),
    ])


def train_head(embeddings, epochs=1, lr=0.001, batch_size=64, seed=0,
               standardize=False, head=None):
    """Train the head with BCE over shuffled mini-batches.

    Returns (head, per-epoch loss history, standardization (mean, std) or None).
    """
    y, mask = embeddings.binary_labels()
    x = embeddings.vectors[mask]
    if x.shape[0] == 0 or len(np.unique(y)) < 2:
        raise DegenerateLabelsError("training needs both normal and anomalous rows")

    norm = None
    if standardize:
        mean = x.mean(axis=0)
        std = np.maximum(x.std(axis=0), 1e-8)
        x = (x - mean) / std
        norm = (mean, std)

    if head is None:
        head = build_head(x.shape[1], seed=seed)
    optimizer = neural.Adam(head, lr=lr)
    rng = neural.make_rng(seed + 1)

    history = []
    for _ in range(epochs):
        order = rng.permutation(x.shape[0])
        epoch_loss = 0.0
        for start in range(0, x.shape[0], batch_size):
            idx = order[start : start + batch_size]
            logits = head.forward(x[idx], training=True, rng=rng)[:, 0]
            loss, grad = neural.bce_with_logits_loss(logits, y[idx])
            head.backward(grad[:, None])
            optimizer.step()
            epoch_loss += loss * idx.size
        history.append(epoch_loss / x.shape[0])
    return head, history, norm


_HEAD_MAGIC = b"SFHD"


def head_to_bytes(head, norm=None):
    net_bytes = neural.network_to_bytes(head)
    parts = [_HEAD_MAGIC, bytes([1, 1 if norm is not None else 0])]
    parts.append(len(net_bytes).to_bytes(4, "little"))
    parts.append(net_bytes)
    if norm is not None:
        parts.append(np.asarray(norm[0], dtype="<f8").tobytes())
        parts.append(np.asarray(norm[1], dtype="<f8").tobytes())
    return b"".join(parts)


def head_from_bytes(payload):
    if payload[:4] != _HEAD_MAGIC:
        raise InputError("not a classifier-head container")
    has_norm = payload[5] == 1
    net_len = int.from_bytes(payload[6:10], "little")
    head = neural.network_from_bytes(payload[10 : 10 + net_len])
    norm = None
    if has_norm:
        dim = head.dense_layers()[0].in_dim
        offset = 10 + net_len
        mean = np.frombuffer(payload, "<f8", dim, offset).copy()
        std = np.frombuffer(payload, "<f8", dim, offset + 8 * dim).copy()
        norm = (mean, std)
    return head, norm


def score(head, embeddings, norm=None):
    """Per-clip anomaly probabilities: sigmoid of the head logit."""
    x = embeddings.vectors if isinstance(embeddings, EmbeddingSet) else np.asarray(
        embeddings, dtype=np.float64
    )
    if norm is not None:
        x = (x - norm[0]) / norm[1]
    logits = head.forward(x, training=False)[:, 0]
    return neural.sigmoid(logits)

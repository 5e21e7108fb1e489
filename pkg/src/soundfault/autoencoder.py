"""Dense autoencoder for reconstruction-based anomaly scoring.

Architecture in -> 64 -> 64 -> 8 -> 64 -> 64 -> in, ReLU between layers,
linear output. Trained on normal windows only; a clip's anomaly score is
the mean per-window reconstruction MSE in dB space.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import neural
from .dsp import WindowBatch
from .errors import InsufficientDataError, ShapeError

HIDDEN_DIMS = (64, 64, 8, 64, 64)
STD_FLOOR = 1e-8


@dataclass
class AutoencoderModel:
    network: neural.Network
    feature_mean: np.ndarray  # zero/one vectors when standardization is off
    feature_std: np.ndarray

    @property
    def in_dim(self):
        return self.network.dense_layers()[0].in_dim


def build_autoencoder(in_dim, seed=0):
    rng = neural.make_rng(seed)
    dims = [in_dim, *HIDDEN_DIMS, in_dim]
    layers = []
    for i in range(len(dims) - 1):
        layers.append(neural.Dense(dims[i], dims[i + 1], rng=rng))
        if i < len(dims) - 2:
            layers.append(neural.ReLU())
    return neural.Network(layers)


def _as_matrix(windows):
    if isinstance(windows, WindowBatch):
        return windows.data
    if isinstance(windows, (list, tuple)):
        return np.concatenate(
            [w.data if isinstance(w, WindowBatch) else np.asarray(w) for w in windows]
        )
    return np.asarray(windows, dtype=np.float64)


def train_autoencoder(normal_windows, epochs=50, lr=0.001, batch_size=512,
                      seed=0, standardize=True):
    """Train on normal windows; returns (model, per-epoch loss history).

    standardize=False keeps the raw-dB baseline behavior.
    """
    data = _as_matrix(normal_windows)
    if data.ndim != 2 or data.shape[0] == 0:
        raise InsufficientDataError("empty training set")
    in_dim = data.shape[1]

    if standardize:
        mean = data.mean(axis=0)
        std = np.maximum(data.std(axis=0), STD_FLOOR)
    else:
        mean = np.zeros(in_dim)
        std = np.ones(in_dim)
    scaled = (data - mean) / std

    net = build_autoencoder(in_dim, seed=seed)
    model = AutoencoderModel(network=net, feature_mean=mean, feature_std=std)
    optimizer = neural.Adam(net, lr=lr)
    rng = neural.make_rng(seed + 1)

    history = []
    for _ in range(epochs):
        order = rng.permutation(scaled.shape[0])
        epoch_loss = 0.0
        for start in range(0, scaled.shape[0], batch_size):
            batch = scaled[order[start : start + batch_size]]
            recon = net.forward(batch, training=True, rng=rng)
            loss, grad = neural.mse_loss(recon, batch)
            net.backward(grad)
            optimizer.step()
            epoch_loss += loss * batch.shape[0]
        history.append(epoch_loss / scaled.shape[0])
    return model, history


def score_clip(model, clip_windows):
    """Mean per-window reconstruction MSE for one clip, in dB^2 space."""
    data = _as_matrix(clip_windows)
    if data.shape[0] == 0:
        raise InsufficientDataError("empty window batch")
    if data.shape[1] != model.in_dim:
        raise ShapeError(
            f"window width {data.shape[1]} != model input {model.in_dim}"
        )
    scaled = (data - model.feature_mean) / model.feature_std
    recon = model.network.forward(scaled, training=False)
    recon_db = recon * model.feature_std + model.feature_mean
    return float(np.mean((recon_db - data) ** 2))


# ------------------------------------------------------------- persistence

_AE_MAGIC = b"SFAE"


def model_to_bytes(model):
    net_bytes = neural.network_to_bytes(model.network)
    head = _AE_MAGIC + struct.pack("<BII", 1, model.in_dim, len(net_bytes))
    return (
        head
        + net_bytes
        + model.feature_mean.astype("<f8").tobytes()
        + model.feature_std.astype("<f8").tobytes()
    )


def model_from_bytes(payload):
    if payload[:4] != _AE_MAGIC:
        raise ShapeError("not an autoencoder container")
    _, in_dim, net_len = struct.unpack("<BII", payload[4:13])
    net = neural.network_from_bytes(payload[13 : 13 + net_len])
    offset = 13 + net_len
    mean = np.frombuffer(payload, "<f8", in_dim, offset).copy()
    std = np.frombuffer(payload, "<f8", in_dim, offset + 8 * in_dim).copy()
    return AutoencoderModel(network=net, feature_mean=mean, feature_std=std)

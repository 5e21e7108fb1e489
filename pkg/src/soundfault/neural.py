"""Minimal dense-network core: layers, losses, Adam, persistence.

Exact backpropagation, no autograd. Everything is float64 and seeded
through an explicit numpy Generator (PCG64) so training is bit-reproducible.
"""

import struct

import numpy as np

from .errors import ShapeError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


class Dense:
    """Fully connected layer: out = x @ W.T + b.

    lr_multiplier scales the learning rate for this layer; 0 freezes it.
    """

    def __init__(self, in_dim, out_dim, rng=None, lr_multiplier=1.0):
        bound = 1.0 / np.sqrt(in_dim)
        if rng is None:
            self.weights = np.zeros((out_dim, in_dim))
            self.bias = np.zeros(out_dim)
        else:
            self.weights = rng.uniform(-bound, bound, size=(out_dim, in_dim))
            self.bias = rng.uniform(-bound, bound, size=out_dim)
        self.lr_multiplier = float(lr_multiplier)
        self.grad_weights = np.zeros_like(self.weights)
        self.grad_bias = np.zeros_like(self.bias)
        self._input = None

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]

    def forward(self, x, training=False, rng=None):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_dim:
            raise ShapeError(
                f"dense layer expects width {self.in_dim}, got {x.shape[-1]}"
            )
        self._input = x
        return x @ self.weights.T + self.bias

    def backward(self, grad_out):
        self.grad_weights = grad_out.T @ self._input
        self.grad_bias = grad_out.sum(axis=0)
        return grad_out @ self.weights


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x, training=False, rng=None):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad_out):
        return grad_out * self._mask


class Dropout:
    """Inverted dropout: scales survivors by 1/(1-p) at train time."""

    def __init__(self, p):
        if not 0.0 <= p < 1.0:
            raise ShapeError(f"dropout p must be in [0, 1), got {p}")
        self.p = float(p)
        self._mask = None

    def forward(self, x, training=False, rng=None):
        if not training or self.p == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.p
        self._mask = (rng.random(x.shape) < keep) / keep
        return x * self._mask

    def backward(self, grad_out):
        if self._mask is None:
            return grad_out
        return grad_out * self._mask


class Network:
    """An ordered layer stack with joint forward/backward."""

    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x, training=False, rng=None):
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        return x

    def backward(self, grad_out):
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def dense_layers(self):
        return [l for l in self.layers if isinstance(l, Dense)]


# ------------------------------------------------------------------ losses

def mse_loss(pred, target):
    """Mean squared error over all elements; returns (loss, dloss/dpred)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    n = diff.size
    return float(np.mean(diff**2)), 2.0 * diff / n


def sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits_loss(logits, labels):
    """Numerically stable binary cross entropy; returns (loss, dloss/dlogits)."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if z.shape != y.shape:
        raise ShapeError(f"shape mismatch {z.shape} vs {y.shape}")
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    grad = (sigmoid(z) - y) / z.size
    return float(np.mean(loss)), grad


# ------------------------------------------------------------------- Adam

class Adam:
    """Adam with bias correction; per-layer effective lr = lr * lr_multiplier."""

    def __init__(self, network, lr=0.001,
                 beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
        self.network = network
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._state = {}
        for layer in network.dense_layers():
            self._state[id(layer)] = {
                "m_w": np.zeros_like(layer.weights),
                "v_w": np.zeros_like(layer.weights),
                "m_b": np.zeros_like(layer.bias),
                "v_b": np.zeros_like(layer.bias),
            }

    def step(self):
        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        for layer in self.network.dense_layers():
            if layer.lr_multiplier == 0.0:
                continue
            st = self._state[id(layer)]
            eff_lr = self.lr * layer.lr_multiplier
            for pname, gname, m, v in (
                ("weights", "grad_weights", "m_w", "v_w"),
                ("bias", "grad_bias", "m_b", "v_b"),
            ):
                grad = getattr(layer, gname)
                st[m] = self.beta1 * st[m] + (1.0 - self.beta1) * grad
                st[v] = self.beta2 * st[v] + (1.0 - self.beta2) * grad**2
                update = eff_lr * (st[m] / bc1) / (np.sqrt(st[v] / bc2) + self.eps)
                getattr(layer, pname)[...] -= update


# ------------------------------------------------------------- persistence

_NET_MAGIC = b"SFNN"
_LAYER_DENSE = 1
_LAYER_RELU = 2
_LAYER_DROPOUT = 3


def network_to_bytes(net):
    """Binary container: magic, version byte, layer list, float64 params."""
    parts = [_NET_MAGIC, struct.pack("<BI", 1, len(net.layers))]
    for layer in net.layers:
        if isinstance(layer, Dense):
            parts.append(
                struct.pack(
                    "<BIId", _LAYER_DENSE, layer.out_dim, layer.in_dim,
                    layer.lr_multiplier,
                )
            )
            parts.append(layer.weights.astype("<f8").tobytes())
            parts.append(layer.bias.astype("<f8").tobytes())
        elif isinstance(layer, ReLU):
            parts.append(struct.pack("<B", _LAYER_RELU))
        elif isinstance(layer, Dropout):
            parts.append(struct.pack("<Bd", _LAYER_DROPOUT, layer.p))
        else:
            raise ShapeError(f"cannot serialize layer {type(layer).__name__}")
    return b"".join(parts)


def network_from_bytes(payload):
    if payload[:4] != _NET_MAGIC:
        raise ShapeError("not a network container")
    version, n_layers = struct.unpack("<BI", payload[4:9])
    if version != 1:
        raise ShapeError(f"unsupported network container version {version}")
    offset = 9
    layers = []
    for _ in range(n_layers):
        (kind,) = struct.unpack_from("<B", payload, offset)
        offset += 1
        if kind == _LAYER_DENSE:
            out_dim, in_dim, lr_mult = struct.unpack_from("<IId", payload, offset)
            offset += 16
            layer = Dense(in_dim, out_dim, rng=None, lr_multiplier=lr_mult)
            n_w = out_dim * in_dim
            layer.weights = (
                np.frombuffer(payload, "<f8", n_w, offset)
                .reshape(out_dim, in_dim).copy()
            )
            offset += 8 * n_w
            layer.bias = np.frombuffer(payload, "<f8", out_dim, offset).copy()
            offset += 8 * out_dim
            layers.append(layer)
        elif kind == _LAYER_RELU:
            layers.append(ReLU())
        elif kind == _LAYER_DROPOUT:
            (p,) = struct.unpack_from("<d", payload, offset)
            offset += 8
            layers.append(Dropout(p))
        else:
            raise ShapeError(f"unknown layer code {kind}")
    return Network(layers)

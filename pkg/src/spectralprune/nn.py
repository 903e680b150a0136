"""Minimal dense feed-forward network stack.

Networks are plain value objects built on numpy arrays: forward pass with
optional hidden-state capture, Adam/SGD training with manual backprop,
evaluation, structural surgery on hidden units, and a small binary
checkpoint format.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataIOError, DimensionError, NumericError

ACTIVATIONS = ("relu", "sigmoid", "tanh", "identity")
HEADS = ("classification", "reconstruction")

CHECKPOINT_MAGIC = b"SPNET"
CHECKPOINT_VERSION = 1


def _act(kind, z):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if kind == "tanh":
        return np.tanh(z)
    if kind == "identity":
        return z
    raise ConfigError(f"unknown activation {kind!r}")


def _act_grad(kind, z, post):
    # derivative of the activation, expressed from z and act(z)
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    if kind == "sigmoid":
        return post * (1.0 - post)
    if kind == "tanh":
        return 1.0 - post * post
    if kind == "identity":
        return np.ones_like(z)
    raise ConfigError(f"unknown activation {kind!r}")


@dataclass
class DenseLayer:
    """One fully connected layer: weight (out x in), bias (out,)."""

    weight: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise ConfigError("weight must be 2-D and bias 1-D")
        if self.weight.shape[0] != self.bias.shape[0]:
            raise ConfigError("bias length must match weight rows")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")

    @property
    def out_units(self):
        return self.weight.shape[0]

    @property
    def in_units(self):
        return self.weight.shape[1]

    def copy(self):
        return DenseLayer(self.weight.copy(), self.bias.copy(), self.activation)


@dataclass
class HiddenTrace:
    """Pre/post-activation batches for every hidden layer of one forward pass."""

    pre: list[np.ndarray]
    post: list[np.ndarray]


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")


class Network:
    """Sequence of dense layers plus a task head.

    The last layer is the output layer; all earlier layers are hidden and
    their units are the prunable graph nodes. The head decides the loss:
    softmax cross-entropy for "classification", mean-squared-error for
    "reconstruction".
    """

    def __init__(self, layers, head="classification"):
        if head not in HEADS:
            raise ConfigError(f"unknown head {head!r}")
        if not layers:
            raise ConfigError("need at least one layer")
        for l, (a, b) in enumerate(zip(layers, layers[1:])):
            if a.out_units != b.in_units:
                raise DimensionError(
                    f"layer {l} outputs {a.out_units} units but layer {l + 1} "
                    f"expects {b.in_units}",
                    layer_index=l,
                )
        for l, layer in enumerate(layers):
            if not (np.all(np.isfinite(layer.weight)) and np.all(np.isfinite(layer.bias))):
                raise NumericError(f"non-finite parameters in layer {l}")
        self.layers = list(layers)
        self.head = head

    @property
    def num_hidden(self):
        return len(self.layers) - 1

    @property
    def input_dim(self):
        return self.layers[0].in_units

    @property
    def output_dim(self):
        return self.layers[-1].out_units

    def hidden_sizes(self):
        return [layer.out_units for layer in self.layers[:-1]]

    def copy(self):
        return Network([layer.copy() for layer in self.layers], self.head)

    def describe(self):
        return {
            "sizes": [self.input_dim] + [l.out_units for l in self.layers],
            "activations": [l.activation for l in self.layers],
            "head": self.head,
        }


def init_network(sizes, activations=None, head="classification", seed=0):
    """He-style uniform init scaled by fan-in, seeded.

    sizes = [input_dim, hidden_1, ..., output_dim].
    """
    if len(sizes) < 3:
        raise ConfigError("sizes must contain input, >=1 hidden, and output dims")
    if activations is None:
        activations = ["relu"] * (len(sizes) - 2) + ["identity"]
    if len(activations) != len(sizes) - 1:
        raise ConfigError("one activation per layer required")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(sizes, sizes[1:], activations):
        bound = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append(DenseLayer(w, np.zeros(fan_out), act))
    return Network(layers, head=head)


def forward(network, batch, want_trace=False):
    """Run a batch (rows = samples) through the network.

    Returns (outputs, trace) where trace is a HiddenTrace when requested,
    else None.
    """
    a = np.asarray(batch, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.shape[1] != network.input_dim:
        raise DimensionError(
            f"batch has {a.shape[1]} columns but layer 0 expects "
            f"{network.input_dim}",
            layer_index=0,
        )
    pre_list, post_list = [], []
    for l, layer in enumerate(network.layers):
        z = a @ layer.weight.T + layer.bias
        a = _act(layer.activation, z)
        if want_trace and l < network.num_hidden:
            pre_list.append(z)
            post_list.append(a)
    if not np.all(np.isfinite(a)):
        raise NumericError("non-finite network output")
    trace = HiddenTrace(pre_list, post_list) if want_trace else None
    return a, trace


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward_full(network, x):
    # forward keeping every layer's pre/post, for backprop
    acts = [x]
    pres = []
    a = x
    for layer in network.layers:
        z = a @ layer.weight.T + layer.bias
        a = _act(layer.activation, z)
        pres.append(z)
        acts.append(a)
    return pres, acts


def loss_and_grads(network, x, y):
    """Mean loss on a batch and gradients for every weight and bias.

    y is an int label vector for classification, a target matrix for
    reconstruction. Returns (loss, [(dW, db), ...]) in layer order.
    """
    x = np.asarray(x, dtype=np.float64)
    pres, acts = _forward_full(network, x)
    out = acts[-1]
    n = x.shape[0]
    if network.head == "classification":
        probs = _softmax(out)
        labels = np.asarray(y, dtype=np.intp)
        loss = -np.mean(np.log(probs[np.arange(n), labels] + 1e-300))
        dout = probs
        dout[np.arange(n), labels] -= 1.0
        dout /= n
    else:
        target = np.asarray(y, dtype=np.float64)
        diff = out - target
        loss = float(np.mean(diff * diff))
        dout = 2.0 * diff / diff.size
    grads = [None] * len(network.layers)
    da = dout
    for l in range(len(network.layers) - 1, -1, -1):
        layer = network.layers[l]
        dz = da * _act_grad(layer.activation, pres[l], acts[l + 1])
        grads[l] = (dz.T @ acts[l], dz.sum(axis=0))
        if l > 0:
            da = dz @ layer.weight
    return float(loss), grads


def train(network, data, config):
    """Train a copy of the network; the input network is left untouched.

    data must expose .inputs and .targets. Returns (trained_network,
    metrics) where metrics is a per-epoch list of dicts with "loss" and,
    for classification, "accuracy".
    """
    inputs = np.asarray(data.inputs, dtype=np.float64)
    targets = data.targets
    if inputs.shape[0] == 0:
        raise ConfigError("empty training dataset")
    if inputs.shape[1] != network.input_dim:
        raise DimensionError(
            f"dataset has {inputs.shape[1]} features but network expects "
            f"{network.input_dim}",
            layer_index=0,
        )
    net = network.copy()
    metrics = []
    if config.epochs == 0:
        return net, metrics

    rng = np.random.default_rng(config.rng_seed)
    params = []
    for layer in net.layers:
        params.extend((layer.weight, layer.bias))
    if config.optimizer == "adam":
        m = [np.zeros_like(p) for p in params]
        v = [np.zeros_like(p) for p in params]
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        step = 0

    n = inputs.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        correct = 0
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            xb = inputs[idx]
            yb = targets[idx]
            loss, grads = loss_and_grads(net, xb, yb)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch {bi}"
                )
            epoch_loss += loss * len(idx)
            if net.head == "classification":
                out, _ = forward(net, xb)
                correct += int(np.sum(out.argmax(axis=1) == yb))
            flat_grads = [g for pair in grads for g in pair]
            if config.optimizer == "sgd":
                for p, g in zip(params, flat_grads):
                    p -= config.learning_rate * g
            else:
                step += 1
                for j, (p, g) in enumerate(zip(params, flat_grads)):
                    m[j] = beta1 * m[j] + (1 - beta1) * g
                    v[j] = beta2 * v[j] + (1 - beta2) * g * g
                    mhat = m[j] / (1 - beta1**step)
                    vhat = v[j] / (1 - beta2**step)
                    p -= config.learning_rate * mhat / (np.sqrt(vhat) + eps)
        record = {"loss": epoch_loss / n}
        if net.head == "classification":
            record["accuracy"] = correct / n
        metrics.append(record)
    return net, metrics


def evaluate(network, data, batch_size=1024):
    """Accuracy for classification heads, mean squared error otherwise."""
    inputs = np.asarray(data.inputs, dtype=np.float64)
    targets = data.targets
    if inputs.shape[0] == 0:
        raise ConfigError("empty evaluation dataset")
    n = inputs.shape[0]
    if network.head == "classification":
        correct = 0
        for start in range(0, n, batch_size):
            out, _ = forward(network, inputs[start : start + batch_size])
            correct += int(np.sum(out.argmax(axis=1) == targets[start : start + batch_size]))
        return correct / n
    total = 0.0
    count = 0
    target_mat = np.asarray(targets, dtype=np.float64)
    for start in range(0, n, batch_size):
        out, _ = forward(network, inputs[start : start + batch_size])
        diff = out - target_mat[start : start + batch_size]
        total += float(np.sum(diff * diff))
        count += diff.size
    return total / count


def surgery_remove_units(network, layer_index, unit_ids):
    """Remove hidden units: rows of layer l plus matching columns of l+1.

    Every other parameter is carried over bit-identically.
    """
    if not 0 <= layer_index < network.num_hidden:
        raise ConfigError(f"layer {layer_index} is not a hidden layer")
    layer = network.layers[layer_index]
    ids = sorted(set(int(i) for i in unit_ids))
    for i in ids:
        if not 0 <= i < layer.out_units:
            raise ConfigError(f"unit {i} out of range for layer {layer_index}")
    if len(ids) >= layer.out_units:
        raise ConfigError(
            f"refusing to remove all {layer.out_units} units of layer {layer_index}"
        )
    keep = np.setdiff1d(np.arange(layer.out_units), ids)
    new_layers = [l.copy() for l in network.layers]
    new_layers[layer_index] = DenseLayer(
        layer.weight[keep, :].copy(), layer.bias[keep].copy(), layer.activation
    )
    nxt = network.layers[layer_index + 1]
    new_layers[layer_index + 1] = DenseLayer(
        nxt.weight[:, keep].copy(), nxt.bias.copy(), nxt.activation
    )
    return Network(new_layers, network.head)


def param_count(network):
    return sum(l.weight.size + l.bias.size for l in network.layers)


def save_checkpoint(network, path, metadata=None):
    """Write the SPNET binary checkpoint plus a plain-text sidecar."""
    header = json.dumps(network.describe()).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(header)))
        f.write(header)
        for layer in network.layers:
            f.write(np.ascontiguousarray(layer.weight, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
    meta = dict(metadata or {})
    meta.setdefault("architecture", network.describe())
    with open(str(path) + ".meta", "w") as f:
        for key in sorted(meta):
            f.write(f"{key}: {json.dumps(meta[key], sort_keys=True)}\n")


def load_checkpoint(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:5] != CHECKPOINT_MAGIC:
        raise DataIOError(f"{path}: bad checkpoint magic {blob[:5]!r}")
    if len(blob) < 13:
        raise DataIOError(f"{path}: truncated checkpoint header")
    version, header_len = struct.unpack("<II", blob[5:13])
    if version != CHECKPOINT_VERSION:
        raise DataIOError(f"{path}: unsupported checkpoint version {version}")
    try:
        desc = json.loads(blob[13 : 13 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataIOError(f"{path}: corrupt checkpoint header") from exc
    sizes = desc["sizes"]
    offset = 13 + header_len
    layers = []
    try:
        for fan_in, fan_out, act in zip(sizes, sizes[1:], desc["activations"]):
            w_bytes = fan_out * fan_in * 8
            w = np.frombuffer(blob, dtype="<f8", count=fan_out * fan_in, offset=offset)
            offset += w_bytes
            b = np.frombuffer(blob, dtype="<f8", count=fan_out, offset=offset)
            offset += fan_out * 8
            layers.append(DenseLayer(w.reshape(fan_out, fan_in).copy(), b.copy(), act))
    except ValueError as exc:
        raise DataIOError(f"{path}: checkpoint tensor data truncated") from exc
    if offset != len(blob):
        raise DataIOError(f"{path}: checkpoint truncated or has trailing bytes")
    return Network(layers, head=desc["head"])

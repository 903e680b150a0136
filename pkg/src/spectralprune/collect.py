"""Hidden-state observation collection and per-unit standardization.

Each hidden unit is represented by the vector of its pre- or
post-activation values across the calibration samples; rows are units,
columns are samples.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConfigError, DataIOError, NumericError

DEFAULT_EPSILON = 1e-8
OBS_MAGIC = b"SPOBS"


@dataclass
class CalibrationSet:
    """Inference samples used only for structural estimation."""

    samples: np.ndarray  # n x input_dim
    provenance: str = "train"

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[0] < 2:
            raise ConfigError("calibration set needs >= 2 samples")
        if self.provenance == "test":
            raise ConfigError("calibration samples must not come from the test split")

    @property
    def n(self):
        return self.samples.shape[0]


@dataclass
class ObservationMatrix:
    layer_index: int
    kind: str  # "pre" | "post"
    values: np.ndarray  # m_l x n
    standardized: bool = False
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.kind not in ("pre", "post"):
            raise ConfigError(f"kind must be 'pre' or 'post', got {self.kind!r}")

    @property
    def num_units(self):
        return self.values.shape[0]

    @property
    def num_samples(self):
        return self.values.shape[1]


def collect_observations(network, calib, layer_index, batch_size=1024):
    """Forward the calibration set, returning (pre, post) observation matrices."""
    if not 0 <= layer_index < network.num_hidden:
        raise ConfigError(f"layer {layer_index} is not a hidden layer")
    pre_chunks, post_chunks = [], []
    for start in range(0, calib.n, batch_size):
        batch = calib.samples[start : start + batch_size]
        _, trace = nn.forward(network, batch, want_trace=True)
        pre_chunks.append(trace.pre[layer_index])
        post_chunks.append(trace.post[layer_index])
    pre = np.concatenate(pre_chunks, axis=0).T  # units x samples
    post = np.concatenate(post_chunks, axis=0).T
    for kind, mat in (("pre", pre), ("post", post)):
        if not np.all(np.isfinite(mat)):
            unit, sample = np.argwhere(~np.isfinite(mat))[0]
            raise NumericError(
                f"non-finite {kind}-activation at layer {layer_index}, "
                f"unit {unit}, sample {sample}"
            )
    return (
        ObservationMatrix(layer_index, "pre", pre),
        ObservationMatrix(layer_index, "post", post),
    )


def standardize(obs, epsilon=DEFAULT_EPSILON):
    """Standardize each unit's row to zero mean, (population) unit variance.

    Constant rows map to all-zero rows; the epsilon only guards the divide.
    """
    if epsilon <= 0:
        raise ConfigError("epsilon must be > 0")
    if obs.standardized:
        raise ConfigError("observations already standardized")
    if obs.num_samples < 2:
        raise ConfigError("need >= 2 samples to standardize")
    mu = obs.values.mean(axis=1, keepdims=True)
    sigma = obs.values.std(axis=1, keepdims=True)  # population (1/n)
    values = (obs.values - mu) / (sigma + epsilon)
    return ObservationMatrix(obs.layer_index, obs.kind, values, standardized=True, epsilon=epsilon)


def save_observations(obs, path):
    """Columnar binary export: header then row-major little-endian float64."""
    with open(path, "wb") as f:
        f.write(OBS_MAGIC)
        f.write(
            struct.pack(
                "<iBiid",
                obs.layer_index,
                {"pre": 0, "post": 1}[obs.kind] | (2 if obs.standardized else 0),
                obs.num_units,
                obs.num_samples,
                obs.epsilon,
            )
        )
        f.write(np.ascontiguousarray(obs.values, dtype="<f8").tobytes())


def load_observations(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:5] != OBS_MAGIC:
        raise DataIOError(f"{path}: bad observation-file magic")
    layer_index, flags, m, n, eps = struct.unpack("<iBiid", blob[5 : 5 + 21])
    values = np.frombuffer(blob, dtype="<f8", count=m * n, offset=5 + 21)
    return ObservationMatrix(
        layer_index,
        "post" if flags & 1 else "pre",
        values.reshape(m, n).copy(),
        standardized=bool(flags & 2),
        epsilon=eps,
    )

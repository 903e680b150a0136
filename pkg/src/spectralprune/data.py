"""Datasets: IDX parsing, synthetic generators, and split bookkeeping."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

from .collect import CalibrationSet
from .errors import ConfigError, DataIOError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class SplitView:
    """One named split: what train()/evaluate() consume."""

    inputs: np.ndarray
    targets: np.ndarray
    task: str


@dataclass
class Dataset:
    inputs: np.ndarray  # N x d
    targets: np.ndarray  # int labels or target matrix
    task: str  # "classification" | "reconstruction"
    splits: dict = field(default_factory=dict)  # name -> index array
    split_seed: int = 0

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        if self.task not in ("classification", "reconstruction"):
            raise ConfigError(f"unknown task {self.task!r}")

    @property
    def n(self):
        return self.inputs.shape[0]

    def split(self, name):
        if name not in self.splits:
            raise ConfigError(f"no split named {name!r}")
        idx = self.splits[name]
        return SplitView(self.inputs[idx], self.targets[idx], self.task)

    def make_splits(self, test_fraction=0.2, validation_fraction=0.1, seed=0):
        """Disjoint train/validation/test index splits, seeded."""
        rng = np.random.default_rng(seed)
        order = rng.permutation(self.n)
        n_test = int(round(test_fraction * self.n))
        n_val = int(round(validation_fraction * (self.n - n_test)))
        self.splits = {
            "test": np.sort(order[:n_test]),
            "validation": np.sort(order[n_test : n_test + n_val]),
            "train": np.sort(order[n_test + n_val :]),
        }
        self.split_seed = seed
        return self

    def calibration(self, n=512, seed=0):
        """Seeded calibration draw from the train split only."""
        train_idx = self.splits.get("train")
        if train_idx is None:
            raise ConfigError("make_splits must run before drawing calibration data")
        rng = np.random.default_rng(seed)
        take = min(n, train_idx.size)
        chosen = rng.choice(train_idx, size=take, replace=False)
        calib = CalibrationSet(self.inputs[chosen], provenance="train")
        calib.indices = np.sort(chosen)
        return calib

    def audit_split_hygiene(self, calibration_indices=None):
        """Raise if splits overlap or calibration touches the test split."""
        names = list(self.splits)
        for a in range(len(names)):
            for b in range(a + 1, len(names)):
                overlap = np.intersect1d(self.splits[names[a]], self.splits[names[b]])
                if overlap.size:
                    raise ConfigError(
                        f"splits {names[a]!r} and {names[b]!r} share {overlap.size} samples"
                    )
        if calibration_indices is not None:
            leak = np.intersect1d(calibration_indices, self.splits.get("test", []))
            if leak.size:
                raise ConfigError(f"{leak.size} calibration samples leak from the test split")
        return True


def _read_idx(path, expected_magic, what):
    opener = gzip.open if str(path).endswith(".gz") else open
    try:
        with opener(path, "rb") as f:
            blob = f.read()
    except OSError as exc:
        raise DataIOError(f"{path}: {exc}") from exc
    if len(blob) < 8:
        raise DataIOError(f"{path}: truncated IDX header")
    magic = struct.unpack(">I", blob[:4])[0]
    if magic != expected_magic:
        raise DataIOError(
            f"{path}: bad IDX magic 0x{magic:08x} for {what} "
            f"(expected 0x{expected_magic:08x})"
        )
    count = struct.unpack(">I", blob[4:8])[0]
    return blob, count


def load_idx(images_path, labels_path):
    """Parse an IDX image/label pair into a flattened [0,1] dataset."""
    img_blob, n_images = _read_idx(images_path, IDX_IMAGES_MAGIC, "images")
    if len(img_blob) < 16:
        raise DataIOError(f"{images_path}: truncated IDX image header")
    rows, cols = struct.unpack(">II", img_blob[8:16])
    expected = 16 + n_images * rows * cols
    if len(img_blob) != expected:
        raise DataIOError(
            f"{images_path}: expected {expected} bytes for {n_images} images, got {len(img_blob)}"
        )
    images = np.frombuffer(img_blob, dtype=np.uint8, offset=16)
    images = images.reshape(n_images, rows * cols).astype(np.float64) / 255.0

    lbl_blob, n_labels = _read_idx(labels_path, IDX_LABELS_MAGIC, "labels")
    if len(lbl_blob) != 8 + n_labels:
        raise DataIOError(f"{labels_path}: truncated IDX label body")
    if n_labels != n_images:
        raise DataIOError(
            f"image/label count mismatch: {n_images} images vs {n_labels} labels"
        )
    labels = np.frombuffer(lbl_blob, dtype=np.uint8, offset=8).astype(np.intp)
    return Dataset(images, labels, task="classification")


def generate_blobs(classes=2, dim=2, separation=6.0, n=1000, seed=0):
    """Seeded Gaussian blobs: unit-variance clusters around separated means."""
    if classes < 2 or dim < 1 or n < 1:
        raise ConfigError("need classes >= 2, dim >= 1, n >= 1")
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(classes, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = directions * separation
    labels = rng.integers(0, classes, size=n)
    inputs = means[labels] + rng.normal(size=(n, dim))
    return Dataset(inputs, labels.astype(np.intp), task="classification")


def generate_regression(dim=4, out_dim=1, n=1000, noise=0.0, seed=0):
    """y = A x (+ optional Gaussian noise), with a seeded random linear map."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(out_dim, dim))
    x = rng.normal(size=(n, dim))
    y = x @ a.T
    if noise > 0:
        y = y + noise * rng.normal(size=y.shape)
    ds = Dataset(x, y, task="reconstruction")
    ds.linear_map = a
    return ds


def generate_synthetic(spec):
    """Dispatch on spec["kind"]: "blobs" or "regression"."""
    kind = spec.get("kind", "blobs")
    args = {k: v for k, v in spec.items() if k != "kind"}
    if kind == "blobs":
        return generate_blobs(**args)
    if kind == "regression":
        return generate_regression(**args)
    raise ConfigError(f"unknown synthetic dataset kind {kind!r}")


def as_reconstruction(dataset):
    """Autoencoder view: inputs double as targets; splits are shared."""
    ds = Dataset(dataset.inputs, dataset.inputs, task="reconstruction")
    ds.splits = dataset.splits
    ds.split_seed = dataset.split_seed
    return ds

"""Shared test fixtures and the MNIST-or-surrogate dataset helper.

The large-scale acceptance tests want real MNIST IDX files; point
SPECTRALPRUNE_DATA_DIR at a directory containing
train-images-idx3-ubyte(.gz) etc. to use them. When absent, a
deterministic 28x28 digit surrogate is built from sklearn's bundled
digits: upscaled, shift-augmented, and noised, which preserves the
784-300-100-10 problem shape and multi-class image structure.
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from spectralprune import data as data_mod

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def _find_mnist():
    root = os.environ.get("SPECTRALPRUNE_DATA_DIR")
    if not root:
        return None
    found = {}
    for key, name in MNIST_FILES.items():
        for candidate in (name, name + ".gz"):
            path = os.path.join(root, candidate)
            if os.path.exists(path):
                found[key] = path
                break
        else:
            return None
    return found


def _upscale_28(img8):
    # bilinear-ish 8x8 -> 28x28 via index mapping; integer math keeps it exact
    idx = np.minimum((np.arange(28) * 8) // 28, 7)
    return img8[np.ix_(idx, idx)]


@lru_cache(maxsize=4)
def digit_dataset(n_train=16000, n_test=2000, seed=0):
    """(dataset, source_name): real MNIST if available, else the surrogate."""
    mnist = _find_mnist()
    if mnist is not None:
        train = data_mod.load_idx(mnist["train_images"], mnist["train_labels"])
        test = data_mod.load_idx(mnist["test_images"], mnist["test_labels"])
        inputs = np.vstack([train.inputs, test.inputs])
        targets = np.concatenate([train.targets, test.targets])
        ds = data_mod.Dataset(inputs, targets, task="classification")
        n = train.n
        rng = np.random.default_rng(seed)
        val = rng.choice(n, size=n // 10, replace=False)
        train_idx = np.setdiff1d(np.arange(n), val)
        ds.splits = {
            "train": train_idx,
            "validation": np.sort(val),
            "test": np.arange(n, n + test.n),
        }
        ds.split_seed = seed
        return ds, "mnist"

    from sklearn.datasets import load_digits

    digits = load_digits()
    base = digits.images / 16.0  # 1797 x 8 x 8 in [0,1]
    labels = digits.target
    rng = np.random.default_rng(seed)
    total = n_train + n_test
    picks = rng.integers(0, base.shape[0], size=total)
    shifts = rng.integers(-2, 3, size=(total, 2))
    noise = 0.05 * rng.standard_normal((total, 784))
    images = np.empty((total, 784))
    for row, (p, (dy, dx)) in enumerate(zip(picks, shifts)):
        img = _upscale_28(base[p])
        img = np.roll(np.roll(img, dy, axis=0), dx, axis=1)
        images[row] = img.reshape(-1)
    images = np.clip(images + noise, 0.0, 1.0)
    ds = data_mod.Dataset(images, labels[picks].astype(np.intp), task="classification")
    n_val = n_train // 10
    ds.splits = {
        "train": np.arange(0, n_train - n_val),
        "validation": np.arange(n_train - n_val, n_train),
        "test": np.arange(n_train, total),
    }
    ds.split_seed = seed
    return ds, "digits-surrogate"


def reconstruction_view(dataset):
    ds = data_mod.as_reconstruction(dataset)
    ds.splits = dataset.splits
    return ds

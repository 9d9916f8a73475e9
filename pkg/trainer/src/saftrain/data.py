"""Dataset loading.

Real datasets come through torchvision and are returned as float32
arrays in [0, 1] (channel-first).  A deterministic synthetic-blobs
dataset exists so the pipeline and its tests run in environments where
the real downloads are unavailable.
"""

from __future__ import annotations

import numpy as np


class DatasetUnavailableError(RuntimeError):
    """The requested dataset is not on disk and cannot be downloaded."""


def _to_arrays(ds) -> tuple:
    import torch
    from torch.utils.data import DataLoader

    loader = DataLoader(ds, batch_size=4096)
    xs, ys = [], []
    for x, y in loader:
        xs.append(x.numpy())
        ys.append(y.numpy())
    return np.concatenate(xs).astype(np.float32), np.concatenate(ys)


def load_dataset(name: str, root: str) -> tuple:
    """(train_x, train_y, test_x, test_y) for 'mnist' or 'cifar10'."""
    import torchvision
    from torchvision import transforms

    tfm = transforms.ToTensor()
    cls = {"mnist": torchvision.datasets.MNIST,
           "cifar10": torchvision.datasets.CIFAR10}.get(name)
    if cls is None:
        raise ValueError(f"unknown dataset {name!r}")
    def fetch(train: bool):
        try:
            return cls(root=root, train=train, transform=tfm, download=False)
        except RuntimeError:
            return cls(root=root, train=train, transform=tfm, download=True)

    try:
        train, test = fetch(True), fetch(False)
    except Exception as exc:  # torchvision raises various things on failure
        raise DatasetUnavailableError(
            f"{name} not found under {root} and download failed: {exc}") from exc
    return _to_arrays(train) + _to_arrays(test)


def dataset_available(name: str, root: str) -> bool:
    import torchvision

    cls = {"mnist": torchvision.datasets.MNIST,
           "cifar10": torchvision.datasets.CIFAR10}[name]
    try:
        cls(root=root, train=True, download=False)
        cls(root=root, train=False, download=False)
        return True
    except Exception:
        return False


def synthetic_blobs(in_shape: tuple, n_classes: int = 10,
                    n_train: int = 2048, n_test: int = 512,
                    seed: int = 0, noise: float = 0.25) -> tuple:
    """Gaussian blobs around per-class template images, values in [0, 1].

    Linearly separable enough that small models reach high accuracy in a
    couple of epochs; used for end-to-end pipeline tests.
    """
    rng = np.random.default_rng(seed)
    protos = rng.uniform(0.0, 1.0, size=(n_classes,) + tuple(in_shape))

    def draw(n):
        y = rng.integers(0, n_classes, size=n)
        x = protos[y] + rng.normal(0.0, noise, size=(n,) + tuple(in_shape))
        return np.clip(x, 0.0, 1.0).astype(np.float32), y

    train_x, train_y = draw(n_train)
    test_x, test_y = draw(n_test)
    return train_x, train_y, test_x, test_y

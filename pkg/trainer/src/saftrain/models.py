"""The reference architectures and their float-layer descriptions."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .quantize import FloatLayer


class Fc3(nn.Module):
    """Three-layer fully-connected classifier, 784-128-64-10 for MNIST."""

    def __init__(self, in_features: int = 784, n_classes: int = 10):
        super().__init__()
        self.fc1 = nn.Linear(in_features, 128)
        self.fc2 = nn.Linear(128, 64)
        self.fc3 = nn.Linear(64, n_classes)

    def forward(self, x):
        x = torch.flatten(x, 1)
        x = torch.relu(self.fc1(x))
        x = torch.relu(self.fc2(x))
        return self.fc3(x)


class LeNet(nn.Module):
    """LeNet with ReLU and 2x2 max-pooling.

    Input 1x28x28 (MNIST) or, with in_channels=3 and in_hw=32, CIFAR-10.
    """

    def __init__(self, in_channels: int = 1, in_hw: int = 28,
                 n_classes: int = 10):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, 6, 5)
        self.conv2 = nn.Conv2d(6, 16, 5)
        side = ((in_hw - 4) // 2 - 4) // 2
        self.flat = 16 * side * side
        self.fc1 = nn.Linear(self.flat, 120)
        self.fc2 = nn.Linear(120, 84)
        self.fc3 = nn.Linear(84, n_classes)
        self.pool = nn.MaxPool2d(2)

    def forward(self, x):
        x = self.pool(torch.relu(self.conv1(x)))
        x = self.pool(torch.relu(self.conv2(x)))
        x = torch.flatten(x, 1)
        x = torch.relu(self.fc1(x))
        x = torch.relu(self.fc2(x))
        return self.fc3(x)


def _np(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy().astype(np.float32)


def float_layers(model: nn.Module, in_shape: tuple) -> list:
    """Flatten a trained model into FloatLayer records for quantization.

    The last fc layer gets the identity activation; everything else ReLU.
    Conv layers carry the pooling flag, matching the forward pass.
    """
    if isinstance(model, Fc3):
        dims = [(model.fc1, "relu"), (model.fc2, "relu"), (model.fc3, "ident")]
        layers = []
        shape = in_shape
        for lin, act in dims:
            n = lin.out_features
            layers.append(FloatLayer(
                kind="fc", in_shape=tuple(shape), out_shape=(n,),
                weights=_np(lin.weight).T.copy(), bias=_np(lin.bias),
                act=act))
            shape = (n,)
        return layers
    if isinstance(model, LeNet):
        c, h, w = in_shape
        l1_out = ((6, (h - 4) // 2, (w - 4) // 2))
        h2, w2 = l1_out[1] - 4, l1_out[2] - 4
        l2_out = (16, h2 // 2, w2 // 2)
        layers = [
            FloatLayer(kind="conv2d", in_shape=(c, h, w), out_shape=l1_out,
                       weights=_np(model.conv1.weight), bias=_np(model.conv1.bias),
                       act="relu", pool=True, kernel=(5, 5)),
            FloatLayer(kind="conv2d", in_shape=l1_out, out_shape=l2_out,
                       weights=_np(model.conv2.weight), bias=_np(model.conv2.bias),
                       act="relu", pool=True, kernel=(5, 5)),
        ]
        shape = l2_out
        for lin, act in [(model.fc1, "relu"), (model.fc2, "relu"),
                         (model.fc3, "ident")]:
            n = lin.out_features
            layers.append(FloatLayer(
                kind="fc", in_shape=tuple(shape), out_shape=(n,),
                weights=_np(lin.weight).T.copy(), bias=_np(lin.bias),
                act=act))
            shape = (n,)
        return layers
    raise ValueError(f"no float-layer description for {type(model).__name__}")


def build_model(arch: str, in_shape: tuple) -> nn.Module:
    if arch == "fc3":
        return Fc3(in_features=int(np.prod(in_shape)))
    if arch == "lenet":
        c, h, w = in_shape
        if h != w:
            raise ValueError(f"lenet expects square inputs, got {h}x{w}")
        return LeNet(in_channels=c, in_hw=h)
    raise ValueError(f"unknown architecture {arch!r}")

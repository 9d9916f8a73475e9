"""Plain supervised training loop (Adam + cross-entropy, CPU-friendly)."""

from __future__ import annotations

import logging
import time

import numpy as np
import torch
from torch import nn

log = logging.getLogger(__name__)


def set_seed(seed: int) -> None:
    torch.manual_seed(seed)
    np.random.seed(seed % (1 << 32))


def train_model(model: nn.Module, train_x: np.ndarray, train_y: np.ndarray,
                epochs: int, lr: float, batch_size: int,
                seed: int = 0) -> nn.Module:
    set_seed(seed)
    device = "cpu"
    model = model.to(device)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    x = torch.from_numpy(train_x)
    y = torch.from_numpy(np.asarray(train_y, dtype=np.int64))
    n = len(x)
    gen = torch.Generator().manual_seed(seed)
    model.train()
    for epoch in range(epochs):
        t0 = time.time()
        perm = torch.randperm(n, generator=gen)
        total, correct, loss_sum = 0, 0, 0.0
        for i in range(0, n, batch_size):
            idx = perm[i:i + batch_size]
            xb, yb = x[idx], y[idx]
            opt.zero_grad()
            out = model(xb)
            loss = loss_fn(out, yb)
            loss.backward()
            opt.step()
            loss_sum += float(loss.detach()) * len(xb)
            correct += int((out.argmax(1) == yb).sum())
            total += len(xb)
        log.info("epoch %d/%d: loss %.4f, train acc %.4f (%.1fs)",
                 epoch + 1, epochs, loss_sum / total, correct / total,
                 time.time() - t0)
    model.eval()
    return model


def float_accuracy(model: nn.Module, x: np.ndarray, y: np.ndarray,
                   batch_size: int = 1024) -> float:
    model.eval()
    correct = 0
    with torch.no_grad():
        for i in range(0, len(x), batch_size):
            out = model(torch.from_numpy(x[i:i + batch_size]))
            correct += int((out.argmax(1).numpy() == y[i:i + batch_size]).sum())
    return correct / len(x)

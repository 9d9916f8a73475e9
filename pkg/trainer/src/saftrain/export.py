"""End-to-end train -> quantize -> export pipeline."""

from __future__ import annotations

import json
import logging
import os

import numpy as np

from .containers import write_dataset, write_model
from .models import build_model, float_layers
from .quantize import int8_forward, quantize_input, quantize_model
from .recipes import TrainingRecipe
from .train import float_accuracy, train_model

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Post-quantization accuracy fell below the recipe's floor."""


def int8_accuracy(qmodel, x: np.ndarray, y: np.ndarray,
                  batch_size: int = 512) -> float:
    correct = 0
    for i in range(0, len(x), batch_size):
        q = quantize_input(x[i:i + batch_size], qmodel.in_scale)
        logits = int8_forward(qmodel, q)
        correct += int((np.argmax(logits, axis=1) == y[i:i + batch_size]).sum())
    return correct / len(x)


def select_subset(n_total: int, n: int, seed: int) -> np.ndarray:
    """Deterministic image selection for exported datasets."""
    if n > n_total:
        raise ValueError(f"requested {n} images from a set of {n_total}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n_total, size=n, replace=False))


def export_dataset(qmodel, x: np.ndarray, y: np.ndarray, n: int, seed: int,
                   path) -> np.ndarray:
    """Quantize and write n images selected by seed; returns the indices."""
    idx = select_subset(len(x), n, seed)
    q = quantize_input(x[idx], qmodel.in_scale)
    write_dataset(q, np.asarray(y)[idx], path)
    return idx


def train_and_export(recipe: TrainingRecipe, data: tuple, out_dir,
                     seed: int = 0, epochs: int | None = None,
                     eval_n: int = 256, eval_seed: int = 1,
                     enforce_floor: bool = True) -> dict:
    """Train, quantize, and write model + eval subset + eval report.

    data: (train_x, train_y, test_x, test_y) float32 images in [0, 1].
    Writes model.json, eval_dataset.json, and eval.json into out_dir and
    returns the eval report.  Raises TrainingDiverged when the quantized
    accuracy misses the recipe's floor.
    """
    train_x, train_y, test_x, test_y = data
    epochs = recipe.epochs if epochs is None else epochs
    model = build_model(recipe.arch, recipe.in_shape)
    model = train_model(model, train_x, train_y, epochs=epochs,
                        lr=recipe.lr, batch_size=recipe.batch_size, seed=seed)
    float_acc = float_accuracy(model, test_x, test_y)
    log.info("%s: float test accuracy %.4f", recipe.name, float_acc)

    calib = train_x[:recipe.calib_size]
    qmodel = quantize_model(
        recipe.name, float_layers(model, recipe.in_shape), calib,
        metadata={"recipe": recipe.name, "arch": recipe.arch,
                  "dataset": recipe.dataset, "epochs": epochs,
                  "train_seed": seed})
    int8_acc = int8_accuracy(qmodel, test_x, test_y)
    log.info("%s: int8 test accuracy %.4f (floor %.2f)",
             recipe.name, int8_acc, recipe.accuracy_floor)

    os.makedirs(out_dir, exist_ok=True)
    write_model(qmodel, os.path.join(out_dir, "model.json"))
    eval_n = min(eval_n, len(test_x))
    idx = export_dataset(qmodel, test_x, test_y, eval_n, eval_seed,
                         os.path.join(out_dir, "eval_dataset.json"))
    subset_acc = int8_accuracy(qmodel, test_x[idx], np.asarray(test_y)[idx])

    report = {
        "recipe": recipe.name,
        "dataset": recipe.dataset,
        "epochs": epochs,
        "seed": seed,
        "float_accuracy": float_acc,
        "int8_accuracy": int8_acc,
        "accuracy_floor": recipe.accuracy_floor,
        "input_scale": qmodel.in_scale,
        "shifts": [l.shift for l in qmodel.layers],
        "eval_subset": {"n": int(eval_n), "seed": eval_seed,
                        "int8_accuracy": subset_acc},
    }
    with open(os.path.join(out_dir, "eval.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")

    if enforce_floor and int8_acc < recipe.accuracy_floor:
        raise TrainingDiverged(
            f"{recipe.name}: int8 accuracy {int8_acc:.4f} below floor "
            f"{recipe.accuracy_floor:.2f} (report still written)")
    return report

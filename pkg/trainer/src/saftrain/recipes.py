"""Training recipes for the three reference model/dataset pairs."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TrainingRecipe:
    name: str
    arch: str                 # "fc3" | "lenet"
    dataset: str              # "mnist" | "cifar10"
    in_shape: tuple
    epochs: int
    lr: float
    batch_size: int
    calib_size: int           # calibration images for quantization
    accuracy_floor: float     # post-quantization; below this = divergence


RECIPES = {
    "fc3-mnist": TrainingRecipe(
        name="fc3-mnist", arch="fc3", dataset="mnist",
        in_shape=(1, 28, 28), epochs=8, lr=1e-3, batch_size=128,
        calib_size=512, accuracy_floor=0.95),
    "lenet-mnist": TrainingRecipe(
        name="lenet-mnist", arch="lenet", dataset="mnist",
        in_shape=(1, 28, 28), epochs=10, lr=1e-3, batch_size=128,
        calib_size=512, accuracy_floor=0.97),
    "lenet-cifar10": TrainingRecipe(
        name="lenet-cifar10", arch="lenet", dataset="cifar10",
        in_shape=(3, 32, 32), epochs=30, lr=1e-3, batch_size=128,
        calib_size=512, accuracy_floor=0.65),
}


def get_recipe(name: str) -> TrainingRecipe:
    try:
        return RECIPES[name]
    except KeyError:
        raise ValueError(
            f"unknown recipe {name!r} (have: {', '.join(sorted(RECIPES))})") from None

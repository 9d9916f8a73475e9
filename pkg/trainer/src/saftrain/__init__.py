"""Training and int8 export pipeline for the systolic-array simulator.

This package trains the three reference classifiers (a 3-layer
fully-connected net on MNIST, LeNet on MNIST, LeNet on CIFAR-10),
quantizes them post-training to symmetric int8 with power-of-two output
shifts, and writes model/dataset containers in the simulator's JSON
format.  It shares no code with the simulator: the containers are the
only interface.
"""

from .quantize import QuantizedLayer, QuantizedModel, int8_forward, quantize_model
from .recipes import RECIPES, TrainingRecipe

__all__ = [
    "QuantizedLayer",
    "QuantizedModel",
    "int8_forward",
    "quantize_model",
    "RECIPES",
    "TrainingRecipe",
]

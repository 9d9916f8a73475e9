"""Writers for the simulator's model and dataset container formats.

The formats are JSON with base64-encoded little-endian row-major tensors
(int8: 1 byte per element, int32: 4 bytes).  This module is written from
the format description, not shared with the simulator, so the exported
files double as a cross-implementation check of the format itself.
"""

from __future__ import annotations

import base64
import json

import numpy as np

FORMAT_VERSION = 1


def _b64(arr: np.ndarray) -> str:
    return base64.b64encode(
        np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes()
    ).decode("ascii")


def layer_doc(layer) -> dict:
    """JSON document for one quantized layer."""
    d = {
        "type": layer.kind,
        "in_shape": list(layer.in_shape),
        "out_shape": list(layer.out_shape),
        "weights": {"shape": list(layer.weights.shape),
                    "data": _b64(layer.weights.astype(np.int8))},
        "bias": {"shape": list(layer.bias.shape),
                 "data": _b64(layer.bias.astype(np.int32))},
        "shift": int(layer.shift),
        "nlf": {"shape": [256], "data": _b64(layer.nlf_table.astype(np.int8))},
        "pool": bool(layer.pool),
    }
    if layer.kind == "conv2d":
        d["kernel"] = list(layer.kernel)
        d["stride"] = list(layer.stride)
        d["pad"] = list(layer.pad)
    return d


def write_model(qmodel, path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "metadata": {"name": qmodel.name, **qmodel.metadata},
        "layers": [layer_doc(l) for l in qmodel.layers],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def write_dataset(images: np.ndarray, labels, path) -> None:
    """Write int8 images of shape [n, C, H, W] with their labels."""
    if images.dtype != np.int8:
        raise ValueError(f"dataset images must be int8, got {images.dtype}")
    doc = {"images": [{"label": int(y),
                       "shape": list(x.shape),
                       "data": _b64(x)}
                      for x, y in zip(images, labels)]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")

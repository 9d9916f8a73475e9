"""Model and dataset container formats.

Models and datasets are stored as JSON with base64-encoded little-endian
tensors (int8: 1 byte/element, int32: 4 bytes/element, row-major).  The
format is deliberately plain so fixtures stay reviewable in a diff.
"""

from __future__ import annotations

import base64
import binascii
import json
from dataclasses import dataclass, field

import numpy as np

from .lowering import ConvGeometry
from .quant import MAX_SHIFT, Lut

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Container fails validation."""


def _b64_encode(arr: np.ndarray) -> str:
    return base64.b64encode(arr.astype(arr.dtype.newbyteorder("<")).tobytes()).decode("ascii")


def _b64_decode(data: str, dtype, shape, where: str) -> np.ndarray:
    try:
        raw = base64.b64decode(data, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ModelFormatError(f"{where}: invalid base64 tensor data: {exc}") from exc
    dt = np.dtype(dtype).newbyteorder("<")
    expected = int(np.prod(shape)) * dt.itemsize
    if len(raw) != expected:
        raise ModelFormatError(
            f"{where}: tensor has {len(raw)} bytes, expected {expected} "
            f"for shape {tuple(shape)}")
    return np.frombuffer(raw, dtype=dt).astype(dtype).reshape(shape)


@dataclass
class LayerSpec:
    kind: str                      # "fc" | "conv2d"
    in_shape: tuple
    out_shape: tuple
    weights: np.ndarray            # fc: (K, N) int8; conv2d: (N, C, kh, kw) int8
    bias: np.ndarray               # (N,) int32
    shift: int
    nlf_table: np.ndarray          # (256,) int8, indexed by unsigned input
    pool: bool = False
    kernel: tuple | None = None    # conv2d only: (kh, kw)
    stride: tuple = (1, 1)
    pad: tuple = (0, 0)

    def geometry(self) -> ConvGeometry:
        if self.kind != "conv2d":
            raise ValueError("geometry() only applies to conv2d layers")
        c, h, w = self.in_shape
        return ConvGeometry(in_channels=c, in_h=h, in_w=w,
                            out_channels=self.weights.shape[0],
                            k_h=self.kernel[0], k_w=self.kernel[1],
                            stride_h=self.stride[0], stride_w=self.stride[1],
                            pad_h=self.pad[0], pad_w=self.pad[1])

    def lut(self) -> Lut:
        return Lut(tuple(int(v) for v in self.nlf_table))

    @property
    def n_outputs(self) -> int:
        """N of the lowered matmul (output channels / neurons)."""
        return int(self.bias.shape[0])

    def validate(self, index: int) -> None:
        where = f"layer {index}"
        if self.kind not in ("fc", "conv2d"):
            raise ModelFormatError(f"{where}: unknown kind {self.kind!r}")
        if not 0 <= self.shift <= MAX_SHIFT:
            raise ModelFormatError(
                f"{where}: shift {self.shift} outside [0, {MAX_SHIFT}]")
        if self.nlf_table.shape != (256,):
            raise ModelFormatError(f"{where}: NLF table must have 256 entries")
        if self.bias.ndim != 1:
            raise ModelFormatError(f"{where}: bias must be 1-D")
        if self.kind == "fc":
            k = int(np.prod(self.in_shape))
            if self.weights.shape != (k, self.n_outputs):
                raise ModelFormatError(
                    f"{where}: fc weights {self.weights.shape} != ({k}, {self.n_outputs})")
            if self.pool:
                raise ModelFormatError(f"{where}: pooling on fc layers is unsupported")
            if tuple(self.out_shape) != (self.n_outputs,):
                raise ModelFormatError(
                    f"{where}: fc out_shape {self.out_shape} != ({self.n_outputs},)")
        else:
            if self.kernel is None:
                raise ModelFormatError(f"{where}: conv2d layer needs a kernel")
            geom = self.geometry()
            n = geom.out_channels
            if self.weights.shape != (n, geom.in_channels, geom.k_h, geom.k_w):
                raise ModelFormatError(
                    f"{where}: conv weights {self.weights.shape} inconsistent")
            if self.bias.shape != (n,):
                raise ModelFormatError(f"{where}: bias length != out_channels")
            oh, ow = geom.out_h, geom.out_w
            if self.pool:
                if oh % 2 or ow % 2:
                    raise ModelFormatError(
                        f"{where}: pooled conv output {oh}x{ow} must be even")
                oh, ow = oh // 2, ow // 2
            if tuple(self.out_shape) != (n, oh, ow):
                raise ModelFormatError(
                    f"{where}: out_shape {self.out_shape} != ({n}, {oh}, {ow})")


@dataclass
class ModelSpec:
    name: str
    layers: list
    metadata: dict = field(default_factory=dict)

    @property
    def in_shape(self) -> tuple:
        return tuple(self.layers[0].in_shape)

    @property
    def n_logits(self) -> int:
        return int(np.prod(self.layers[-1].out_shape))

    def validate(self) -> None:
        if not self.layers:
            raise ModelFormatError("model has no layers")
        prev = None
        for i, layer in enumerate(self.layers):
            layer.validate(i)
            if prev is not None and int(np.prod(prev)) != int(np.prod(layer.in_shape)):
                raise ModelFormatError(
                    f"layer {i}: in_shape {layer.in_shape} does not chain "
                    f"from previous out_shape {prev}")
            prev = layer.out_shape


@dataclass
class ImageSample:
    label: int
    pixels: np.ndarray  # int8, shape [C, H, W]


def _layer_to_json(layer: LayerSpec) -> dict:
    d = {
        "type": layer.kind,
        "in_shape": list(layer.in_shape),
        "out_shape": list(layer.out_shape),
        "weights": {"shape": list(layer.weights.shape),
                    "data": _b64_encode(layer.weights.astype(np.int8))},
        "bias": {"shape": list(layer.bias.shape),
                 "data": _b64_encode(layer.bias.astype(np.int32))},
        "shift": int(layer.shift),
        "nlf": {"shape": [256], "data": _b64_encode(layer.nlf_table.astype(np.int8))},
        "pool": bool(layer.pool),
    }
    if layer.kind == "conv2d":
        d["kernel"] = list(layer.kernel)
        d["stride"] = list(layer.stride)
        d["pad"] = list(layer.pad)
    return d


def _layer_from_json(d: dict, index: int) -> LayerSpec:
    where = f"layer {index}"
    try:
        kind = d["type"]
        in_shape = tuple(d["in_shape"])
        out_shape = tuple(d["out_shape"])
        weights = _b64_decode(d["weights"]["data"], np.int8,
                              d["weights"]["shape"], f"{where} weights")
        bias = _b64_decode(d["bias"]["data"], np.int32,
                           d["bias"]["shape"], f"{where} bias")
        nlf = _b64_decode(d["nlf"]["data"], np.int8, d["nlf"]["shape"],
                          f"{where} nlf")
        shift = int(d["shift"])
        pool = bool(d.get("pool", False))
    except KeyError as exc:
        raise ModelFormatError(f"{where}: missing field {exc}") from exc
    kernel = tuple(d["kernel"]) if "kernel" in d else None
    stride = tuple(d.get("stride", (1, 1)))
    pad = tuple(d.get("pad", (0, 0)))
    return LayerSpec(kind=kind, in_shape=in_shape, out_shape=out_shape,
                     weights=weights, bias=bias, shift=shift,
                     nlf_table=nlf.reshape(256), pool=pool,
                     kernel=kernel, stride=stride, pad=pad)


def model_to_json(model: ModelSpec) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "metadata": {"name": model.name, **model.metadata},
        "layers": [_layer_to_json(l) for l in model.layers],
    }


def model_from_json(doc: dict) -> ModelSpec:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    meta = dict(doc.get("metadata", {}))
    name = meta.pop("name", "unnamed")
    layers = [_layer_from_json(d, i) for i, d in enumerate(doc.get("layers", []))]
    model = ModelSpec(name=name, layers=layers, metadata=meta)
    model.validate()
    return model


def save_model(model: ModelSpec, path) -> None:
    model.validate()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> ModelSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(json.load(fh))


def dataset_to_json(images: list) -> dict:
    return {"images": [{"label": int(s.label),
                        "shape": list(s.pixels.shape),
                        "data": _b64_encode(s.pixels.astype(np.int8))}
                       for s in images]}


def dataset_from_json(doc: dict) -> list:
    out = []
    for i, d in enumerate(doc.get("images", [])):
        pixels = _b64_decode(d["data"], np.int8, d["shape"], f"image {i}")
        out.append(ImageSample(label=int(d["label"]), pixels=pixels))
    return out


def save_dataset(images: list, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset_to_json(images), fh, indent=1)
        fh.write("\n")


def load_dataset(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        return dataset_from_json(json.load(fh))

"""Post-training symmetric int8 quantization with power-of-two shifts.

Scheme: per-tensor symmetric int8 (zero-point 0) for activations and
weights, int32 bias at the accumulator scale s_in * s_w, and a per-layer
right shift S chosen so that the output scale is s_in * s_w * 2**S.  S is
picked as the value in [0, 31] minimizing the mean squared requantization
error over a calibration set: |clip8(round(acc / 2**S)) * 2**S - acc|**2.

The int8 inference pipeline mirrors the accelerator's arithmetic exactly:
32-bit wrapping accumulation, round-half-up via an added offset that
itself wraps, arithmetic shift, clip to int8, then a 256-entry LUT
activation and optional 2x2 max-pooling.  ReLU exists only as a LUT in
the export.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_SHIFT = 31
_M32 = 0xFFFFFFFF


def _wrap32(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64) & _M32
    return np.where(x >= 1 << 31, x - (1 << 32), x)


def requantize(acc: np.ndarray, shift: int) -> np.ndarray:
    """32-bit accumulator -> int8, rounding half away from zero upward."""
    if not 0 <= shift <= MAX_SHIFT:
        raise ValueError(f"shift {shift} outside [0, {MAX_SHIFT}]")
    acc = _wrap32(acc)
    if shift > 0:
        acc = _wrap32(acc + (1 << (shift - 1))) >> shift
    return np.clip(acc, -128, 127).astype(np.int8)


def relu_table() -> np.ndarray:
    idx = np.arange(256)
    signed = np.where(idx >= 128, idx - 256, idx)
    return np.maximum(signed, 0).astype(np.int8)


def identity_table() -> np.ndarray:
    idx = np.arange(256)
    return np.where(idx >= 128, idx - 256, idx).astype(np.int8)


_TABLES = {"relu": relu_table, "ident": identity_table}


@dataclass
class FloatLayer:
    """Float-precision layer description extracted from a trained model."""
    kind: str                 # "fc" | "conv2d"
    in_shape: tuple
    out_shape: tuple
    weights: np.ndarray       # fc: (K, N); conv2d: (N, C, kh, kw), float32
    bias: np.ndarray          # (N,) float32
    act: str                  # "relu" | "ident"
    pool: bool = False
    kernel: tuple | None = None
    stride: tuple = (1, 1)
    pad: tuple = (0, 0)


@dataclass
class QuantizedLayer:
    kind: str
    in_shape: tuple
    out_shape: tuple
    weights: np.ndarray       # int8
    bias: np.ndarray          # int32
    shift: int
    nlf_table: np.ndarray     # (256,) int8
    pool: bool = False
    kernel: tuple | None = None
    stride: tuple = (1, 1)
    pad: tuple = (0, 0)
    scale_out: float = 1.0    # dequantization scale of this layer's output


@dataclass
class QuantizedModel:
    name: str
    in_scale: float           # input pixels are round(x / in_scale)
    layers: list
    metadata: dict = field(default_factory=dict)


def _conv_acc(x: np.ndarray, w: np.ndarray, stride, pad) -> np.ndarray:
    """Integer conv2d, batched: x [B,C,H,W] int64, w [N,C,kh,kw] -> [B,N,oh,ow]."""
    b, c, h, wd = x.shape
    n, _, kh, kw = w.shape
    sh, sw = stride
    ph, pw = pad
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    oh = (h + 2 * ph - kh) // sh + 1
    ow = (wd + 2 * pw - kw) // sw + 1
    # materialize receptive fields: [B, oh, ow, C*kh*kw]
    cols = np.empty((b, oh, ow, c * kh * kw), dtype=np.int64)
    i = 0
    for dc in range(c):
        for dy in range(kh):
            for dx in range(kw):
                cols[..., i] = x[:, dc, dy:dy + oh * sh:sh, dx:dx + ow * sw:sw]
                i += 1
    flat_w = w.reshape(n, -1).astype(np.int64)  # row dc, dy, dx order matches
    out = cols @ flat_w.T                       # [B, oh, ow, N]
    return out.transpose(0, 3, 1, 2)


def _maxpool2(x: np.ndarray) -> np.ndarray:
    b, n, h, w = x.shape
    return x.reshape(b, n, h // 2, 2, w // 2, 2).max(axis=(3, 5))


def _layer_acc(layer, acts: np.ndarray, weights: np.ndarray,
               bias: np.ndarray) -> np.ndarray:
    """Pre-shift accumulators for a batch of int8 activations [B, K]."""
    x = acts.astype(np.int64)
    if layer.kind == "fc":
        return x @ weights.astype(np.int64) + bias.astype(np.int64)
    b = x.shape[0]
    imgs = x.reshape((b,) + tuple(layer.in_shape))
    acc = _conv_acc(imgs, weights, layer.stride, layer.pad)
    return acc + bias.astype(np.int64)[None, :, None, None]


def _apply_post(layer, q: np.ndarray, table: np.ndarray) -> np.ndarray:
    """NLF + optional pooling; returns flat int8 activations [B, K_next]."""
    out = table[q.astype(np.int64) & 0xFF]
    if layer.pool:
        out = _maxpool2(out)
    return out.reshape(out.shape[0], -1).astype(np.int8)


def _best_shift(acc: np.ndarray) -> int:
    """Shift minimizing mean squared requantization error on `acc`."""
    acc32 = _wrap32(acc).astype(np.float64)
    best, best_err = 0, None
    for s in range(MAX_SHIFT + 1):
        deq = requantize(acc, s).astype(np.float64) * float(1 << s)
        err = float(np.mean((deq - acc32) ** 2))
        if best_err is None or err < best_err:
            best, best_err = s, err
    return best


def quantize_input(x: np.ndarray, in_scale: float) -> np.ndarray:
    return np.clip(np.round(np.asarray(x, dtype=np.float64) / in_scale),
                   -128, 127).astype(np.int8)


def quantize_model(name: str, float_layers: list, calib: np.ndarray,
                   metadata: dict | None = None) -> QuantizedModel:
    """Quantize a float model against a calibration batch.

    calib: float images [B, C, H, W] (or [B, K] for pure-fc models).
    """
    if len(calib) == 0:
        raise ValueError("calibration set is empty")
    in_scale = max(float(np.abs(calib).max()), 1e-12) / 127.0
    acts = quantize_input(calib, in_scale).reshape(len(calib), -1)
    scale = in_scale
    qlayers = []
    for layer in float_layers:
        w_scale = max(float(np.abs(layer.weights).max()), 1e-12) / 127.0
        wq = np.clip(np.round(layer.weights / w_scale), -128, 127).astype(np.int8)
        acc_scale = scale * w_scale
        bq = np.clip(np.round(layer.bias / acc_scale),
                     -(1 << 31), (1 << 31) - 1).astype(np.int32)
        acc = _layer_acc(layer, acts, wq, bq)
        shift = _best_shift(acc)
        table = _TABLES[layer.act]()
        ql = QuantizedLayer(kind=layer.kind, in_shape=tuple(layer.in_shape),
                            out_shape=tuple(layer.out_shape), weights=wq,
                            bias=bq, shift=shift, nlf_table=table,
                            pool=layer.pool, kernel=layer.kernel,
                            stride=layer.stride, pad=layer.pad,
                            scale_out=acc_scale * (1 << shift))
        qlayers.append(ql)
        acts = _apply_post(ql, requantize(acc, shift), table)
        scale = ql.scale_out
    meta = dict(metadata or {})
    meta["input_scale"] = in_scale
    meta["layer_scales"] = [l.scale_out for l in qlayers]
    return QuantizedModel(name=name, in_scale=in_scale, layers=qlayers,
                          metadata=meta)


def int8_forward(qmodel: QuantizedModel, images: np.ndarray) -> np.ndarray:
    """Batched int8 inference, images int8 [B, C, H, W] -> logits int8 [B, N]."""
    acts = np.asarray(images, dtype=np.int8).reshape(len(images), -1)
    for layer in qmodel.layers:
        acc = _layer_acc(layer, acts, layer.weights, layer.bias)
        acts = _apply_post(layer, requantize(acc, layer.shift), layer.nlf_table)
    return acts

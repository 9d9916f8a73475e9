"""Convolution unrolling (im2col) and pooling-window stream planning.

conv2d layers are mapped onto the matrix-multiplication datapath by
materialising each receptive field as one matrix row; max-pool layers are
realised by reordering the output-row stream so the members of each 2x2
window arrive consecutively at the streaming pool unit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quant import Lut


class ShapeError(ValueError):
    """Tensor or geometry shapes do not match."""


class GeometryError(ValueError):
    """Unsupported layer geometry."""


@dataclass(frozen=True)
class ConvGeometry:
    in_channels: int
    in_h: int
    in_w: int
    out_channels: int
    k_h: int
    k_w: int
    stride_h: int = 1
    stride_w: int = 1
    pad_h: int = 0
    pad_w: int = 0

    def __post_init__(self):
        for name in ("in_channels", "in_h", "in_w", "out_channels", "k_h",
                     "k_w", "stride_h", "stride_w"):
            if getattr(self, name) < 1:
                raise GeometryError(f"{name} must be >= 1")
        if self.pad_h < 0 or self.pad_w < 0:
            raise GeometryError("padding must be non-negative")
        for dim, k, s, p in (("height", self.k_h, self.stride_h, self.pad_h),
                             ("width", self.k_w, self.stride_w, self.pad_w)):
            span = (self.in_h if dim == "height" else self.in_w) + 2 * p - k
            if span < 0 or span % s != 0:
                raise GeometryError(
                    f"conv {dim} geometry does not tile: span={span}, stride={s}")

    @property
    def out_h(self) -> int:
        return (self.in_h + 2 * self.pad_h - self.k_h) // self.stride_h + 1

    @property
    def out_w(self) -> int:
        return (self.in_w + 2 * self.pad_w - self.k_w) // self.stride_w + 1

    @property
    def patch_len(self) -> int:
        """K of the lowered matmul: channels x kernel height x kernel width."""
        return self.in_channels * self.k_h * self.k_w


@dataclass
class MatmulProblem:
    """A lowered layer: activations A (MxK), weights W (KxN), per-column bias."""

    a: np.ndarray
    w: np.ndarray
    bias: np.ndarray
    shift: int
    nlf: Lut
    pool: bool = False
    pool_shape: tuple | None = None  # (out_h, out_w) per channel, pooling only


def patch_offsets(geom: ConvGeometry, m: int):
    """Input coordinates of row m of the unrolled matrix.

    Yields (k, flat_input_index) for every in-bounds element of output pixel
    m's receptive field, in (channel, kernel row, kernel col) order.
    Padding positions are skipped (their value is the zero-point, 0).
    """
    oy, ox = divmod(m, geom.out_w)
    iy0 = oy * geom.stride_h - geom.pad_h
    ix0 = ox * geom.stride_w - geom.pad_w
    k = 0
    for ch in range(geom.in_channels):
        for kr in range(geom.k_h):
            iy = iy0 + kr
            for kc in range(geom.k_w):
                ix = ix0 + kc
                if 0 <= iy < geom.in_h and 0 <= ix < geom.in_w:
                    yield k, (ch * geom.in_h + iy) * geom.in_w + ix
                k += 1


def im2col(inp: np.ndarray, geom: ConvGeometry) -> np.ndarray:
    """Unroll a [C, H, W] int8 activation tensor into an [M, K] matrix."""
    if inp.shape != (geom.in_channels, geom.in_h, geom.in_w):
        raise ShapeError(
            f"input shape {inp.shape} does not match geometry "
            f"({geom.in_channels}, {geom.in_h}, {geom.in_w})")
    flat = inp.reshape(-1)
    m_total = geom.out_h * geom.out_w
    out = np.zeros((m_total, geom.patch_len), dtype=np.int8)
    for m in range(m_total):
        row = out[m]
        for k, idx in patch_offsets(geom, m):
            row[k] = flat[idx]
    return out


def lower_layer(layer, inp: np.ndarray) -> MatmulProblem:
    """Lower one fc or conv2d layer applied to `inp` into a MatmulProblem.

    Weight columns follow the same (channel, kernel row, kernel col)
    flattening order as the im2col rows.
    """
    if layer.kind == "fc":
        k = int(np.prod(layer.in_shape))
        if inp.size != k:
            raise ShapeError(f"fc input size {inp.size} != {k}")
        a = inp.reshape(1, k)
        w = layer.weights
    elif layer.kind == "conv2d":
        geom = layer.geometry()
        a = im2col(inp.reshape(layer.in_shape), geom)
        # (out_c, in_c, k_h, k_w) -> (K, N)
        w = layer.weights.reshape(geom.out_channels, geom.patch_len).T
    else:
        raise ValueError(f"unknown layer kind {layer.kind!r}")
    pool_shape = None
    if layer.pool:
        geom = layer.geometry()
        pool_shape = (geom.out_h, geom.out_w)
    return MatmulProblem(a=a, w=np.ascontiguousarray(w), bias=layer.bias,
                         shift=layer.shift, nlf=layer.lut(),
                         pool=layer.pool, pool_shape=pool_shape)


def pool_plan(out_h: int, out_w: int) -> np.ndarray:
    """Order output rows so 2x2/stride-2 window members are consecutive.

    Returns a permutation of 0..out_h*out_w-1.  Windows are enumerated
    row-major over the pooled grid; within a window the order is
    top-left, top-right, bottom-left, bottom-right.
    """
    if out_h % 2 or out_w % 2:
        raise GeometryError(
            f"2x2 pooling needs even spatial dims, got {out_h}x{out_w}")
    order = []
    for wy in range(out_h // 2):
        for wx in range(out_w // 2):
            base = 2 * wy * out_w + 2 * wx
            order.extend((base, base + 1, base + out_w, base + out_w + 1))
    return np.asarray(order, dtype=np.int64)

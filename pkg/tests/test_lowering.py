import numpy as np
import pytest

from safsim.lowering import (ConvGeometry, GeometryError, ShapeError, im2col,
                             lower_layer, patch_offsets, pool_plan)
from safsim.modelio import LayerSpec

from conftest import IDENT_TABLE


def conv2d_oracle(inp, weights, geom):
    """Direct nested-loop convolution, int64, zero padding.

    Independent of im2col: walks output pixels and kernel taps explicitly.
    """
    out = np.zeros((geom.out_channels, geom.out_h, geom.out_w), dtype=np.int64)
    for oc in range(geom.out_channels):
        for oy in range(geom.out_h):
            for ox in range(geom.out_w):
                acc = 0
                for ic in range(geom.in_channels):
                    for ky in range(geom.k_h):
                        for kx in range(geom.k_w):
                            iy = oy * geom.stride_h - geom.pad_h + ky
                            ix = ox * geom.stride_w - geom.pad_w + kx
                            if 0 <= iy < geom.in_h and 0 <= ix < geom.in_w:
                                acc += int(inp[ic, iy, ix]) * int(weights[oc, ic, ky, kx])
                out[oc, oy, ox] = acc
    return out


def random_geometry(rng):
    while True:
        c = int(rng.integers(1, 4))
        kh, kw = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        sh, sw = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        ph, pw = int(rng.integers(0, 2)), int(rng.integers(0, 2))
        h = kh + sh * int(rng.integers(0, 5)) - 2 * ph
        w = kw + sw * int(rng.integers(0, 5)) - 2 * pw
        if h < 1 or w < 1:
            continue
        n = int(rng.integers(1, 5))
        return ConvGeometry(in_channels=c, in_h=h, in_w=w, out_channels=n,
                            k_h=kh, k_w=kw, stride_h=sh, stride_w=sw,
                            pad_h=ph, pad_w=pw)


def test_im2col_matches_nested_loop_oracle():
    rng = np.random.default_rng(7)
    for _ in range(60):
        geom = random_geometry(rng)
        inp = rng.integers(-128, 128, (geom.in_channels, geom.in_h, geom.in_w)
                           ).astype(np.int8)
        weights = rng.integers(-24, 25, (geom.out_channels, geom.in_channels,
                                         geom.k_h, geom.k_w)).astype(np.int8)
        a = im2col(inp, geom)
        w = weights.reshape(geom.out_channels, geom.patch_len).T
        got = (a.astype(np.int64) @ w.astype(np.int64)).T.reshape(
            geom.out_channels, geom.out_h, geom.out_w)
        assert np.array_equal(got, conv2d_oracle(inp, weights, geom))


def test_im2col_identity_kernel():
    # 1x1 kernel, stride 1: the unrolled matrix is the input, pixel-major
    geom = ConvGeometry(in_channels=2, in_h=3, in_w=3, out_channels=1,
                        k_h=1, k_w=1)
    inp = np.arange(18, dtype=np.int8).reshape(2, 3, 3)
    a = im2col(inp, geom)
    assert a.shape == (9, 2)
    assert np.array_equal(a[:, 0], inp[0].reshape(-1))
    assert np.array_equal(a[:, 1], inp[1].reshape(-1))


def test_im2col_rejects_wrong_shape():
    geom = ConvGeometry(in_channels=1, in_h=4, in_w=4, out_channels=1,
                        k_h=3, k_w=3)
    with pytest.raises(ShapeError):
        im2col(np.zeros((1, 5, 5), dtype=np.int8), geom)


def test_geometry_must_tile():
    with pytest.raises(GeometryError):
        ConvGeometry(in_channels=1, in_h=4, in_w=4, out_channels=1,
                     k_h=3, k_w=3, stride_h=2)  # span 1 not divisible by 2


def test_patch_offsets_skips_padding():
    geom = ConvGeometry(in_channels=1, in_h=2, in_w=2, out_channels=1,
                        k_h=3, k_w=3, pad_h=1, pad_w=1)
    ks = [k for k, _ in patch_offsets(geom, 0)]  # top-left output pixel
    # corner receptive field: only the 2x2 in-bounds taps appear
    assert ks == [4, 5, 7, 8]


def test_lower_layer_fc_shapes():
    layer = LayerSpec(kind="fc", in_shape=(6,), out_shape=(4,),
                      weights=np.zeros((6, 4), dtype=np.int8),
                      bias=np.zeros(4, dtype=np.int32), shift=0,
                      nlf_table=IDENT_TABLE)
    prob = lower_layer(layer, np.zeros(6, dtype=np.int8))
    assert prob.a.shape == (1, 6) and prob.w.shape == (6, 4)
    with pytest.raises(ShapeError):
        lower_layer(layer, np.zeros(5, dtype=np.int8))


def test_lower_layer_unknown_kind():
    layer = LayerSpec(kind="fc", in_shape=(2,), out_shape=(2,),
                      weights=np.zeros((2, 2), dtype=np.int8),
                      bias=np.zeros(2, dtype=np.int32), shift=0,
                      nlf_table=IDENT_TABLE)
    layer.kind = "avgpool"
    with pytest.raises(ValueError):
        lower_layer(layer, np.zeros(2, dtype=np.int8))


def test_pool_plan_is_permutation():
    for oh, ow in ((2, 2), (4, 6), (6, 4), (8, 8)):
        order = pool_plan(oh, ow)
        assert sorted(order.tolist()) == list(range(oh * ow))


def test_pool_plan_window_members_consecutive():
    oh, ow = 4, 6
    order = pool_plan(oh, ow)
    for w0 in range(0, oh * ow, 4):
        rows = [divmod(int(m), ow) for m in order[w0:w0 + 4]]
        ys = {y for y, _ in rows}
        xs = {x for _, x in rows}
        assert len(ys) == 2 and len(xs) == 2
        assert max(ys) - min(ys) == 1 and max(xs) - min(xs) == 1


def test_pool_plan_rejects_odd_dims():
    with pytest.raises(GeometryError):
        pool_plan(3, 4)

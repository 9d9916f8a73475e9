"""Deterministic synthetic model/dataset fixtures.

Two topologies mirroring typical small classifiers: a 3-layer
fully-connected net (784-128-64-10) with intermediate ReLU, and a small
LeNet-style convnet with ReLU and max-pooling.  Weights and images come
from a seeded SplitMix64 stream, so the same (kind, seed) always yields
byte-identical containers.

The convnet is built as a nearest-feature-template classifier: its final
layer weights are the mean-centred feature vectors of ten prototype
images, and the dataset consists of noisy copies of those prototypes.

Dataset images are drawn from a larger candidate pool by top-2 logit
margin, which stands in for the classification-confidence profile of a
trained counterpart: the default convnet dataset keeps the widest
margins (an easy, well-separated task), `hard=True` keeps the narrowest
(a barely-resolved task), and the fully-connected fixture keeps the
narrowest margins of its random-image pool.  Confidence is the main
driver of how often a latched bit error flips the predicted class, so
this knob is what lets synthetic weights reproduce the qualitative
sensitivity gaps between differently-trained real models.
"""

from __future__ import annotations

import numpy as np

from .lowering import lower_layer
from .modelio import ImageSample, LayerSpec, ModelSpec
from .quant import make_identity_lut, make_relu_lut
from .rng import SplitMix64
from .scheduler import reference_inference

_M32 = 0xFFFFFFFF

FIXTURE_KINDS = ("fc3", "lenet-like")

_WEIGHT_RANGE = (-24, 24)
_BIAS_RANGE = (-512, 511)
_N_CLASSES = 10
_NOISE = 64           # perturbation amplitude for noisy prototype copies
# candidate images generated per kept dataset image; a larger pool pushes
# the kept margins further toward the selected extreme
_POOL_FACTOR = {"fc3": 8, "lenet-like": 16}


def _rand_array(rng: SplitMix64, shape, lo, hi, dtype):
    flat = [lo + rng.below(hi - lo + 1) for _ in range(int(np.prod(shape)))]
    return np.asarray(flat, dtype=dtype).reshape(shape)


def _lut_table(lut) -> np.ndarray:
    return np.asarray(lut.table, dtype=np.int8)


def _skeleton(kind: str, rng: SplitMix64) -> list:
    wlo, whi = _WEIGHT_RANGE
    blo, bhi = _BIAS_RANGE
    relu = _lut_table(make_relu_lut())
    ident = _lut_table(make_identity_lut())

    def fc(in_shape, n, table):
        k = int(np.prod(in_shape))
        return LayerSpec(kind="fc", in_shape=tuple(in_shape), out_shape=(n,),
                         weights=_rand_array(rng, (k, n), wlo, whi, np.int8),
                         bias=_rand_array(rng, (n,), blo, bhi, np.int32),
                         shift=0, nlf_table=table)

    def conv(in_shape, n, table, pool):
        c, h, w = in_shape
        oh, ow = h - 2, w - 2  # 3x3 kernel, stride 1, no pad
        out_shape = (n, oh // 2, ow // 2) if pool else (n, oh, ow)
        return LayerSpec(kind="conv2d", in_shape=tuple(in_shape),
                         out_shape=out_shape,
                         weights=_rand_array(rng, (n, c, 3, 3), wlo, whi, np.int8),
                         bias=_rand_array(rng, (n,), blo, bhi, np.int32),
                         shift=0, nlf_table=table, pool=pool, kernel=(3, 3))

    if kind == "fc3":
        return [fc((1, 28, 28), 128, relu), fc((128,), 64, relu),
                fc((64,), 10, ident)]
    if kind == "lenet-like":
        return [conv((1, 18, 18), 4, relu, pool=True),
                conv((4, 8, 8), 16, relu, pool=True),
                fc((16, 3, 3), 10, ident)]
    raise ValueError(f"unknown fixture kind {kind!r} (expected one of {FIXTURE_KINDS})")


def _forward_layer(layer, act: np.ndarray) -> np.ndarray:
    """One layer of the functional reference, flat int8 in -> flat int8 out."""
    prob = lower_layer(layer, act.reshape(layer.in_shape))
    y = prob.a.astype(np.int64) @ prob.w.astype(np.int64) \
        + prob.bias.astype(np.int64)
    y &= _M32
    y = np.where(y >= 1 << 31, y - (1 << 32), y)
    shift = layer.shift
    if shift > 0:
        y = (y + (1 << (shift - 1))) & _M32
        y = np.where(y >= 1 << 31, y - (1 << 32), y) >> shift
    y8 = np.clip(y, -128, 127)
    out = layer.nlf_table[np.int64(y8) & 0xFF].T
    if layer.pool:
        oh, ow = prob.pool_shape
        out = out.reshape(out.shape[0], oh // 2, 2, ow // 2, 2).max(axis=(2, 4))
    return out.reshape(-1).astype(np.int8)


def _pre_activations(layer, act: np.ndarray) -> np.ndarray:
    prob = lower_layer(layer, act.reshape(layer.in_shape))
    y = prob.a.astype(np.int64) @ prob.w.astype(np.int64) \
        + prob.bias.astype(np.int64)
    y &= _M32
    return np.where(y >= 1 << 31, y - (1 << 32), y)


def _calibrate_shifts(layers: list, images: list) -> None:
    """Pick per-layer shifts from the pre-activation magnitudes in place.

    The smallest shift mapping the 99.5th |pre-activation| percentile into
    the int8 range is chosen, so activations fill the range with only
    marginal clipping.
    """
    acts = [img.reshape(-1).astype(np.int8) for img in images]
    for layer in layers:
        pres = [_pre_activations(layer, a) for a in acts]
        ceiling = float(np.percentile(np.abs(np.concatenate(
            [p.reshape(-1) for p in pres])), 99.5))
        shift = 0
        while shift < 31 and (ceiling / (1 << shift)) > 127:
            shift += 1
        layer.shift = shift
        acts = [_forward_layer(layer, a) for a in acts]


def _features(layers: list, img: np.ndarray) -> np.ndarray:
    """Activations entering the final layer."""
    act = img.reshape(-1).astype(np.int8)
    for layer in layers[:-1]:
        act = _forward_layer(layer, act)
    return act.astype(np.int64)


def _template_head(layers: list, protos: list) -> None:
    """Rebuild the final layer as a feature-template classifier in place.

    Class c's weight column becomes the mean-centred feature vector of
    prototype c, scaled into the fixture weight range, so each prototype
    (and anything near it) is classified as its own class with a wide
    logit margin.
    """
    wlo, whi = _WEIGHT_RANGE
    feats = np.stack([_features(layers, p) for p in protos])
    centred = feats - feats.mean(axis=0)
    scale = whi / max(1.0, float(np.abs(centred).max()))
    head = layers[-1]
    head.weights = np.clip(np.round(centred * scale), wlo, whi) \
        .astype(np.int8).T.copy()
    head.bias = np.zeros(head.bias.shape, dtype=np.int32)


def _noisy_images(rng: SplitMix64, protos: list, n_images: int,
                  noise: int) -> list:
    shape = protos[0].shape
    size = int(np.prod(shape))
    out = []
    for k in range(n_images):
        base = protos[k % len(protos)].astype(np.int64)
        if noise > 0:
            delta = np.asarray([rng.below(2 * noise + 1) - noise
                                for _ in range(size)]).reshape(shape)
            base = np.clip(base + delta, -128, 127)
        out.append(base.astype(np.int8))
    return out


def _margin(model: ModelSpec, pixels: np.ndarray) -> int:
    logits = np.sort(reference_inference(model, pixels))
    return int(logits[-1] - logits[-2])


def _select_by_margin(model: ModelSpec, pool: list, n_images: int,
                      widest: bool) -> list:
    ranked = sorted(range(len(pool)),
                    key=lambda i: (_margin(model, pool[i]), i))
    keep = ranked[-n_images:] if widest else ranked[:n_images]
    return [pool[i] for i in sorted(keep)]


def gen_fixture(kind: str, seed: int, n_images: int = 16, hard: bool = False):
    """Deterministic (model, dataset) pair for the given topology and seed.

    hard: for the template-classifier convnet, keep the candidate images
    with the narrowest logit margins instead of the widest, emulating a
    task the model barely resolves.
    """
    if n_images < 1:
        raise ValueError("n_images must be >= 1")
    rng = SplitMix64(seed)
    layers = _skeleton(kind, rng)
    in_shape = layers[0].in_shape

    if kind == "fc3":
        pool = [_rand_array(rng, in_shape, -128, 127, np.int8)
                for _ in range(n_images * _POOL_FACTOR[kind])]
        _calibrate_shifts(layers, pool)
        model = _make_model(kind, seed, hard, layers)
        pixels = _select_by_margin(model, pool, n_images, widest=False)
    else:
        protos = [_rand_array(rng, in_shape, -128, 127, np.int8)
                  for _ in range(_N_CLASSES)]
        _calibrate_shifts(layers, protos)
        _template_head(layers, protos)
        _calibrate_shifts(layers, protos)
        # one fewer shift saturates the head, widening the winning margin
        if layers[-1].shift > 0:
            layers[-1].shift -= 1
        model = _make_model(kind, seed, hard, layers)
        pool = _noisy_images(rng, protos, n_images * _POOL_FACTOR[kind], _NOISE)
        pixels = _select_by_margin(model, pool, n_images, widest=not hard)

    images = [ImageSample(label=int(np.argmax(reference_inference(model, p))),
                          pixels=p)
              for p in pixels]
    return model, images


def _make_model(kind: str, seed: int, hard: bool, layers: list) -> ModelSpec:
    name = f"fixture-{kind}-seed{seed}" + ("-hard" if hard else "")
    model = ModelSpec(name=name, layers=layers,
                      metadata={"fixture": kind, "seed": seed, "hard": hard})
    model.validate()
    return model

"""Minimal network kernels: VGG slice, its MLP distillation, color decoder.

Weights are always ingested from a TensorFile; linear weights use the
(out_features, in_features) layout, convolutions (out, in, kh, kw).
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensorfile import TensorFile


class NetsError(Exception):
    pass


@dataclass
class VggSliceWeights:
    """conv1_1, conv1_2, 2x2 max-pool, conv2_1; ReLU after each conv."""

    conv1_1_w: np.ndarray  # (64, 3, 3, 3)
    conv1_1_b: np.ndarray  # (64,)
    conv1_2_w: np.ndarray  # (64, 64, 3, 3)
    conv1_2_b: np.ndarray
    conv2_1_w: np.ndarray  # (128, 64, 3, 3)
    conv2_1_b: np.ndarray

    def __post_init__(self):
        shapes = {
            "conv1_1_w": (64, 3, 3, 3), "conv1_1_b": (64,),
            "conv1_2_w": (64, 64, 3, 3), "conv1_2_b": (64,),
            "conv2_1_w": (128, 64, 3, 3), "conv2_1_b": (128,),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=np.float32)
            if arr.shape != shape:
                raise NetsError(f"{name}: expected shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise NetsError(f"{name}: non-finite weights")
            setattr(self, name, arr)


@dataclass
class MlpVggWeights:
    """Dense 3 -> 64 -> 64 -> 128, ReLU after each layer."""

    w1: np.ndarray  # (64, 3)
    b1: np.ndarray
    w2: np.ndarray  # (64, 64)
    b2: np.ndarray
    w3: np.ndarray  # (128, 64)
    b3: np.ndarray


@dataclass
class DecoderWeights:
    """Dense 128 -> 128 (ReLU) -> 3, sigmoid output."""

    w1: np.ndarray  # (128, 128)
    b1: np.ndarray
    w2: np.ndarray  # (3, 128)
    b2: np.ndarray


def conv2d_3x3(x, w, b):
    """Stride-1 zero-padding-1 3x3 convolution, HxWxCin -> HxWxCout."""
    padded = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    windows = sliding_window_view(padded, (3, 3), axis=(0, 1))  # (H, W, Cin, 3, 3)
    return np.tensordot(windows, w, axes=([2, 3, 4], [1, 2, 3])) + b


def max_pool_2x2(x):
    h, w, c = x.shape
    return x.reshape(h // 2, 2, w // 2, 2, c).max(axis=(1, 3))


def vgg_slice_forward(image, weights: VggSliceWeights):
    """ReLU2_1 feature map, (H/2, W/2, 128). H and W must be even and >= 8."""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 3 or image.shape[2] != 3:
        raise NetsError(f"expected HxWx3 image, got {image.shape}")
    h, w = image.shape[:2]
    if h % 2 or w % 2 or h < 8 or w < 8:
        raise NetsError(f"image sides must be even and >= 8, got {h}x{w}")
    x = np.maximum(conv2d_3x3(image, weights.conv1_1_w, weights.conv1_1_b), 0.0)
    x = np.maximum(conv2d_3x3(x, weights.conv1_2_w, weights.conv1_2_b), 0.0)
    x = max_pool_2x2(x)
    x = np.maximum(conv2d_3x3(x, weights.conv2_1_w, weights.conv2_1_b), 0.0)
    return x.astype(np.float32)


def distill_mlp_vgg(weights: VggSliceWeights) -> MlpVggWeights:
    """Collapse each conv kernel to its spatial sum; drop the pool, keep ReLUs."""
    return MlpVggWeights(
        w1=weights.conv1_1_w.sum(axis=(2, 3)),
        b1=weights.conv1_1_b.copy(),
        w2=weights.conv1_2_w.sum(axis=(2, 3)),
        b2=weights.conv1_2_b.copy(),
        w3=weights.conv2_1_w.sum(axis=(2, 3)),
        b3=weights.conv2_1_b.copy(),
    )


def mlp_vgg_forward(colors, weights: MlpVggWeights):
    """Row-wise dense+ReLU chain, (P, 3) -> (P, 128)."""
    x = np.asarray(colors, dtype=np.float32)
    x = np.maximum(x @ weights.w1.T + weights.b1, 0.0)
    x = np.maximum(x @ weights.w2.T + weights.b2, 0.0)
    x = np.maximum(x @ weights.w3.T + weights.b3, 0.0)
    return x.astype(np.float32)


_OPEN_LO = np.nextafter(np.float32(0.0), np.float32(1.0))
_OPEN_HI = np.nextafter(np.float32(1.0), np.float32(0.0))


def decoder_forward(features, weights: DecoderWeights):
    """(P, 128) -> RGB rows strictly inside (0, 1)."""
    x = np.asarray(features, dtype=np.float32)
    if not np.all(np.isfinite(x)):
        raise NetsError("non-finite decoder input")
    x = np.maximum(x @ weights.w1.T + weights.b1, 0.0)
    x = x @ weights.w2.T + weights.b2
    with np.errstate(over="ignore"):
        y = (1.0 / (1.0 + np.exp(-x.astype(np.float64)))).astype(np.float32)
    # sigmoid saturates past float32 resolution; keep the interval open
    return np.clip(y, _OPEN_LO, _OPEN_HI)


# TensorFile naming scheme (documented in the README)

_VGG_KEYS = ["conv1_1", "conv1_2", "conv2_1"]


def vgg_to_tensorfile(weights: VggSliceWeights, tf=None):
    tf = tf if tf is not None else TensorFile()
    for key in _VGG_KEYS:
        tf.add(f"vgg.{key}.weight", getattr(weights, f"{key}_w"))
        tf.add(f"vgg.{key}.bias", getattr(weights, f"{key}_b"))
    return tf


def vgg_from_tensorfile(tf):
    kw = {}
    for key in _VGG_KEYS:
        kw[f"{key}_w"] = tf[f"vgg.{key}.weight"]
        kw[f"{key}_b"] = tf[f"vgg.{key}.bias"]
    return VggSliceWeights(**kw)


def mlp_vgg_to_tensorfile(weights: MlpVggWeights, tf=None):
    tf = tf if tf is not None else TensorFile()
    for i in (1, 2, 3):
        tf.add(f"mlpvgg.fc{i}.weight", getattr(weights, f"w{i}"))
        tf.add(f"mlpvgg.fc{i}.bias", getattr(weights, f"b{i}"))
    return tf


def mlp_vgg_from_tensorfile(tf):
    return MlpVggWeights(**{
        f"{k}{i}": tf[f"mlpvgg.fc{i}.{n}"]
        for i in (1, 2, 3) for k, n in (("w", "weight"), ("b", "bias"))
    })


def decoder_to_tensorfile(weights: DecoderWeights, tf=None):
    tf = tf if tf is not None else TensorFile()
    for i in (1, 2):
        tf.add(f"decoder.fc{i}.weight", getattr(weights, f"w{i}"))
        tf.add(f"decoder.fc{i}.bias", getattr(weights, f"b{i}"))
    return tf


def decoder_from_tensorfile(tf):
    return DecoderWeights(**{
        f"{k}{i}": tf[f"decoder.fc{i}.{n}"]
        for i in (1, 2) for k, n in (("w", "weight"), ("b", "bias"))
    })


def random_vgg_slice(rng, scale=1.0):
    """He-style random slice weights (tests and demos; real use ingests files)."""
    def conv(cout, cin):
        w = rng.standard_normal((cout, cin, 3, 3)) * np.sqrt(2.0 / (cin * 9)) * scale
        return w.astype(np.float32), (rng.standard_normal(cout) * 0.01).astype(np.float32)

    w1, b1 = conv(64, 3)
    w2, b2 = conv(64, 64)
    w3, b3 = conv(128, 64)
    return VggSliceWeights(w1, b1, w2, b2, w3, b3)


def random_decoder(rng, scale=1.0):
    def fc(cout, cin):
        w = rng.standard_normal((cout, cin)) * np.sqrt(2.0 / cin) * scale
        return w.astype(np.float32), (rng.standard_normal(cout) * 0.01).astype(np.float32)

    w1, b1 = fc(128, 128)
    w2, b2 = fc(3, 128)
    return DecoderWeights(w1, b1, w2, b2)

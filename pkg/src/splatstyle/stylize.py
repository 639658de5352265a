"""Stylization core: semantic matching, local AdaIN on Gaussians, iteration.

The per-Gaussian recipe: encode current base colors to VGG-space features,
renormalize them by the scene's global feature statistics, apply the
semantic-weighted style code, decode back to colors, and finally rewrite
the SH DC terms. Iterating the middle steps sharpens locality; the
matching (and so the style code) is computed once and kept fixed.
"""

from dataclasses import dataclass, field

import numpy as np

from .dictionary import StyleDictionary, build_dictionary
from .nets import decoder_forward, mlp_vgg_forward
from .render import rasterize_features
from .scene import diffuse_colors, update_dc
from .semantic import decode_features

SIGMA_FLOOR = 1e-6


class StylizeError(Exception):
    pass


@dataclass
class StyleAssignment:
    """Per-Gaussian style codes from attention over dictionary entries."""

    m_w: np.ndarray               # (P, 128) weighted means
    sigma_w: np.ndarray           # (P, 128) weighted stds
    attention: np.ndarray | None  # (P, T), rows sum to 1 (kept for heatmaps)


@dataclass
class StylizeConfig:
    iterations: int = 2
    clusters: int = 10
    tau: float = 1.0
    normalize_keys: bool = False
    sh_zero_rest: bool = False
    opacity_weighted_stats: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise StylizeError("iterations must be >= 1")
        if self.clusters < 1:
            raise StylizeError("clusters must be >= 1")
        if self.tau <= 0:
            raise StylizeError("tau must be positive")


@dataclass
class StyleCodec:
    """Encoder/decoder pair for the color <-> feature round trip.

    Defaults come from an MLP-VGG + color decoder; tests may inject doubles.
    """

    encode: callable  # (P, 3) -> (P, C)
    decode: callable  # (P, C) -> (P, 3)

    @classmethod
    def from_weights(cls, mlp_vgg, decoder):
        return cls(
            encode=lambda colors: mlp_vgg_forward(colors, mlp_vgg),
            decode=lambda feats: decoder_forward(feats, decoder),
        )


def global_adain(features, mu_s, sigma_s, opacities=None):
    """Renormalize feature rows to the style's channelwise statistics."""
    f = np.asarray(features, dtype=np.float64)
    if f.shape[0] < 2:
        raise StylizeError("need at least 2 rows for feature statistics")
    mu_c, sigma_c = feature_stats(f, opacities)
    out = np.asarray(sigma_s, dtype=np.float64) * (f - mu_c) / sigma_c + np.asarray(mu_s)
    return out.astype(np.float32)


def feature_stats(features, opacities=None):
    """Channelwise (mean, std); std is population and floored at 1e-6."""
    f = np.asarray(features, dtype=np.float64)
    if opacities is None:
        mu = f.mean(axis=0)
        sigma = f.std(axis=0)
    else:
        w = np.asarray(opacities, dtype=np.float64)
        w = w / w.sum()
        mu = w @ f
        sigma = np.sqrt(np.maximum(w @ (f - mu) ** 2, 0.0))
    return mu, np.maximum(sigma, SIGMA_FLOOR)


def semantic_match(scene_features, dictionary: StyleDictionary, tau=1.0,
                   normalize_keys=False, keep_attention=True):
    """Attention of every Gaussian over dictionary entries (Eq. softmax of
    the cross-correlation), then convex combinations of the style codes."""
    if len(dictionary) == 0:
        raise StylizeError("empty style dictionary")
    feats = np.asarray(scene_features, dtype=np.float64)
    keys = dictionary.keys.astype(np.float64)
    if normalize_keys:
        feats = feats / np.maximum(np.linalg.norm(feats, axis=1, keepdims=True), 1e-12)
        keys = keys / np.maximum(np.linalg.norm(keys, axis=1, keepdims=True), 1e-12)
    logits = feats @ keys.T / tau
    logits -= logits.max(axis=1, keepdims=True)
    att = np.exp(logits)
    att /= att.sum(axis=1, keepdims=True)
    m_w = (att @ dictionary.mus.astype(np.float64)).astype(np.float32)
    sigma_w = (att @ dictionary.sigmas.astype(np.float64)).astype(np.float32)
    return StyleAssignment(m_w=m_w, sigma_w=sigma_w,
                           attention=att.astype(np.float32) if keep_attention else None)


def local_adain(features, assignment: StyleAssignment, opacities=None):
    """One normalize-and-restyle pass with fixed per-Gaussian codes."""
    f = np.asarray(features, dtype=np.float64)
    mu_c, sigma_c = feature_stats(f, opacities)
    out = (assignment.sigma_w.astype(np.float64) * (f - mu_c) / sigma_c
           + assignment.m_w.astype(np.float64))
    return out.astype(np.float32)


def stylize_once(scene, assignment: StyleAssignment, codec: StyleCodec,
                 opacity_weighted=False):
    """Single local-AdaIN pass over the scene's base colors -> (P, 3) colors."""
    colors = diffuse_colors(scene)
    feats = codec.encode(colors)
    styled = local_adain(feats, assignment,
                         scene.opacities if opacity_weighted else None)
    return codec.decode(styled)


@dataclass
class IterationTrace:
    """Per-iteration snapshots kept for inspection."""

    colors: list = field(default_factory=list)       # (P, 3) float32 per iteration
    feature_stats: list = field(default_factory=list)  # (mu, sigma) per iteration


def iterative_stylize(scene, assignment: StyleAssignment, codec: StyleCodec,
                      config: StylizeConfig):
    """Repeat encode -> renormalize -> restyle -> decode, then rewrite SH DC.

    Returns (stylized scene, trace). The matching stays fixed across
    iterations; colors are stored float32 between passes.
    """
    opac = scene.opacities if config.opacity_weighted_stats else None
    trace = IterationTrace()
    colors = diffuse_colors(scene)
    for _ in range(config.iterations):
        feats = codec.encode(colors)
        trace.feature_stats.append(feature_stats(feats, opac))
        styled = local_adain(feats, assignment, opac)
        colors = codec.decode(styled).astype(np.float32)
        trace.colors.append(colors)
    out = update_dc(scene, colors, zero_rest=config.sh_zero_rest)
    return out, trace


def stylize_scene(scene, refs, config: StylizeConfig, codec: StyleCodec,
                  ae_weights, dictionary=None):
    """Full pipeline: decode the semantic field, build the dictionary from
    the references, match, iterate local AdaIN, rewrite SH. The input scene
    is untouched; returns (new scene, assignment, trace)."""
    if not scene.has_semantic:
        raise StylizeError("scene has no semantic field")
    if dictionary is None:
        dictionary = build_dictionary(refs, m=config.clusters, seed=config.seed)
    decoded = decode_features(scene.features, ae_weights)
    assignment = semantic_match(decoded, dictionary, tau=config.tau,
                                normalize_keys=config.normalize_keys)
    styled, trace = iterative_stylize(scene, assignment, codec, config)
    return styled, assignment, trace


def attention_heatmap(assignment: StyleAssignment, scene, cam, entry, threads=None):
    """Rasterize one attention column; grayscale in [0, 1]."""
    if assignment.attention is None:
        raise StylizeError("assignment was built without attention")
    if not 0 <= entry < assignment.attention.shape[1]:
        raise StylizeError(f"entry {entry} out of range")
    col = assignment.attention[:, entry : entry + 1]
    img, _ = rasterize_features(scene, cam, col, threads=threads)
    return np.clip(img[:, :, 0], 0.0, 1.0)

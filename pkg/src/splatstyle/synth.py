"""Deterministic desk-scale test scenes with planted colors, labels, and
semantic codes. Every generator is a pure function of (parameters, seed)."""

import numpy as np

from .cameras import Camera, look_at
from .dictionary import ReferenceBundle
from .nets import vgg_slice_forward
from .scene import C_SH, GaussianScene

DEFAULT_PALETTE = np.array([
    [0.85, 0.25, 0.2],
    [0.2, 0.45, 0.85],
    [0.25, 0.8, 0.35],
    [0.9, 0.8, 0.25],
    [0.7, 0.3, 0.8],
    [0.3, 0.8, 0.8],
], dtype=np.float32)

CODE_DIM = 16
SEMANTIC_DIM = 384


def region_codes(n_regions, scale=1.0):
    """Orthogonal 16-d codes, one per region (scaled basis vectors)."""
    if n_regions > CODE_DIM:
        raise ValueError(f"at most {CODE_DIM} regions supported")
    return (np.eye(CODE_DIM, dtype=np.float32)[:n_regions] * scale)


def embed_codes(codes16):
    """Plant 16-d codes in the 384-d semantic space (zero padding)."""
    codes16 = np.atleast_2d(codes16)
    out = np.zeros((codes16.shape[0], SEMANTIC_DIM), dtype=np.float32)
    out[:, :CODE_DIM] = codes16
    return out


def _strip_labels(x, extent, regions):
    t = (x + extent) / (2 * extent)
    return np.minimum((t * regions).astype(np.int32), regions - 1)


def make_plane_scene(n_per_side=40, depth=5.0, regions=2, extent=2.0,
                     opacity=0.95, seed=0, palette=None, code_scale=1.0,
                     jitter=0.0):
    """Fronto-parallel plane of isotropic Gaussians split into vertical
    strips; flat colors and orthogonal semantic codes per strip.

    Returns (scene, labels)."""
    rng = np.random.default_rng(seed)
    palette = DEFAULT_PALETTE if palette is None else np.asarray(palette, np.float32)
    xs = np.linspace(-extent, extent, n_per_side)
    gx, gy = np.meshgrid(xs, xs)
    pos = np.column_stack([gx.ravel(), gy.ravel(),
                           np.full(n_per_side ** 2, depth)]).astype(np.float32)
    spacing = 2 * extent / (n_per_side - 1)
    if jitter:
        pos[:, :2] += rng.uniform(-jitter, jitter, (len(pos), 2)).astype(np.float32) * spacing
    labels = _strip_labels(pos[:, 0], extent, regions)

    n = len(pos)
    quats = np.zeros((n, 4), dtype=np.float32)
    quats[:, 0] = 1.0
    sh = np.zeros((n, 3, 16), dtype=np.float32)
    sh[:, :, 0] = (palette[labels % len(palette)] - 0.5) / C_SH
    codes = region_codes(regions, scale=code_scale)
    scene = GaussianScene(
        positions=pos,
        rotations=quats,
        scales=np.full((n, 3), spacing * 0.7, dtype=np.float32),
        opacities=np.full(n, opacity, dtype=np.float32),
        sh=sh,
        features=codes[labels],
    )
    return scene, labels


def make_three_plane_scene(depths=(4.0, 6.0, 9.0), n_per_side=28, extent=1.6,
                           opacity=0.95, seed=0, code_scale=1.0):
    """Three staggered fronto-parallel planes at increasing depth.

    Planes are offset laterally so every one is partly visible from the
    authoring arc. Returns (scene, labels) with one label per plane."""
    rng = np.random.default_rng(seed)
    offsets = ((-1.1, 0.0), (0.9, 0.4), (0.0, -0.7))
    parts, labels = [], []
    for k, (depth, (ox, oy)) in enumerate(zip(depths, offsets)):
        xs = np.linspace(-extent, extent, n_per_side)
        gx, gy = np.meshgrid(xs, xs)
        pos = np.column_stack([
            gx.ravel() * (1 + 0.35 * k) + ox,
            gy.ravel() * (1 + 0.35 * k) + oy,
            np.full(n_per_side ** 2, depth),
        ]).astype(np.float32)
        parts.append(pos)
        labels.append(np.full(len(pos), k, dtype=np.int32))
    pos = np.concatenate(parts)
    labels = np.concatenate(labels)
    n = len(pos)
    spacing = 2 * extent / (n_per_side - 1)
    quats = np.zeros((n, 4), dtype=np.float32)
    quats[:, 0] = 1.0
    sh = np.zeros((n, 3, 16), dtype=np.float32)
    sh[:, :, 0] = (DEFAULT_PALETTE[labels % len(DEFAULT_PALETTE)] - 0.5) / C_SH
    # mild per-Gaussian color variation so warp errors are not trivially zero
    sh[:, :, 0] += rng.uniform(-0.12, 0.12, (n, 3)).astype(np.float32)
    scales = np.full((n, 3), spacing * 0.8, dtype=np.float32)
    scales[labels == 1] *= 1.35
    scales[labels == 2] *= 1.7
    codes = region_codes(3, scale=code_scale)
    scene = GaussianScene(
        positions=pos, rotations=quats, scales=scales,
        opacities=np.full(n, opacity, dtype=np.float32),
        sh=sh, features=codes[labels],
    )
    return scene, labels


def make_occlusion_scene(far_depth=8.0, near_depth=4.0, occluder_extent=0.45,
                         n_far=36, n_near=14, opacity=0.97):
    """Large far plane plus a small centered near occluder patch.

    occluder_extent 0 drops the occluder entirely. Returns (scene, labels)
    with label 0 = far plane, 1 = occluder."""
    far, far_labels = make_plane_scene(n_per_side=n_far, depth=far_depth,
                                       regions=1, extent=2.5, opacity=opacity)
    if occluder_extent <= 0:
        return far, np.zeros(len(far), dtype=np.int32)
    near, _ = make_plane_scene(n_per_side=n_near, depth=near_depth, regions=1,
                               extent=occluder_extent, opacity=opacity,
                               palette=DEFAULT_PALETTE[3:])
    scene = GaussianScene(
        positions=np.concatenate([far.positions, near.positions]),
        rotations=np.concatenate([far.rotations, near.rotations]),
        scales=np.concatenate([far.scales, near.scales]),
        opacities=np.concatenate([far.opacities, near.opacities]),
        sh=np.concatenate([far.sh, near.sh]),
        features=np.concatenate([far.features, near.features]),
    )
    labels = np.concatenate([np.zeros(len(far), np.int32), np.ones(len(near), np.int32)])
    return scene, labels


def authoring_camera(width=160, height=120, depth=5.0, extent=2.0, margin=0.92):
    """Head-on camera framing a plane of the given extent at the given depth."""
    f = margin * min(width, height) * depth / (2 * extent)
    return Camera(fx=f, fy=f, cx=width / 2, cy=height / 2,
                  width=width, height=height, near=0.1, far=depth * 10)


def arc_trajectory(n_views=8, target=(0.0, 0.0, 5.0), span=1.6, width=160,
                   height=120, f=None):
    """Forward-facing arc of cameras, all looking at the target point."""
    target = np.asarray(target, dtype=np.float64)
    f = f if f is not None else 0.9 * min(width, height) * target[2] / 4.0
    cams = []
    for i in range(n_views):
        t = i / max(n_views - 1, 1) - 0.5
        eye = np.array([span * t, 0.45 * span * np.sin(np.pi * t), 0.0])
        cams.append(look_at(eye, target, fx=f, fy=f, cx=width / 2, cy=height / 2,
                            width=width, height=height, near=0.1,
                            far=float(target[2]) * 10))
    return cams


def make_reference_image(regions=2, palette=None, hw=(64, 64), sem_hw=(32, 32),
                         vgg_weights=None, codes384=None, code_scale=1.0,
                         noise=0.0, seed=0):
    """Flat vertical color strips plus a planted piecewise-constant 384-d
    semantic map; the VGG map is computed for real when weights are given.

    Returns (ReferenceBundle, codes384, label_map)."""
    rng = np.random.default_rng(seed)
    palette = DEFAULT_PALETTE if palette is None else np.asarray(palette, np.float32)
    h, w = hw
    cols = _strip_labels(np.linspace(-1.0, 1.0, w), 1.0, regions)
    image = palette[cols % len(palette)][None, :, :].repeat(h, axis=0)
    if noise:
        image = np.clip(image + rng.uniform(-noise, noise, image.shape), 0.0, 1.0)
    image = image.astype(np.float32)

    sh_, sw = sem_hw
    sem_cols = _strip_labels(np.linspace(-1.0, 1.0, sw), 1.0, regions)
    if codes384 is None:
        codes384 = embed_codes(region_codes(regions, scale=code_scale))
    label_map = sem_cols[None, :].repeat(sh_, axis=0)
    semantic = codes384[label_map]

    if vgg_weights is not None:
        vgg_map = vgg_slice_forward(image, vgg_weights)
    else:
        vgg_map = np.zeros((h // 2, w // 2, 128), dtype=np.float32)
    return ReferenceBundle(image=image, semantic_map=semantic, vgg_map=vgg_map), \
        codes384, label_map

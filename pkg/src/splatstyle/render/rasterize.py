"""Public rasterization API: feature, color, and depth compositing."""

import numpy as np

from ..scene import sh_colors
from . import backend
from .project import project_scene


class RasterizeError(Exception):
    pass


def _composite_batch(batch, feats_sorted, background, threads):
    kern = backend.get_backend()
    C = feats_sorted.shape[1]
    bg = np.zeros(C, dtype=np.float32) if background is None else \
        np.ascontiguousarray(background, dtype=np.float32)
    if bg.shape != (C,):
        raise RasterizeError(f"background shape {bg.shape} does not match {C} channels")
    return kern.composite(
        np.ascontiguousarray(batch.means2d),
        np.ascontiguousarray(batch.conics),
        np.ascontiguousarray(batch.opacities),
        np.ascontiguousarray(feats_sorted),
        np.ascontiguousarray(batch.tile_offsets),
        np.ascontiguousarray(batch.tile_splats),
        batch.tiles_x, batch.tiles_y, batch.height, batch.width,
        bg, backend.n_threads(threads),
    )


def rasterize_features(scene, cam, feats, background=None, threads=None):
    """Alpha-composite per-Gaussian feature rows into an HxWxC image.

    Returns (image, alpha); alpha is the accumulated per-pixel opacity.
    """
    feats = np.asarray(feats, dtype=np.float32)
    if feats.ndim == 1:
        feats = feats[:, None]
    if feats.shape[0] != len(scene):
        raise RasterizeError(f"got {feats.shape[0]} feature rows for {len(scene)} Gaussians")
    if not np.all(np.isfinite(feats)):
        raise RasterizeError("non-finite features")
    batch = project_scene(scene, cam)
    return _composite_batch(batch, feats[batch.indices], background, threads)


def per_gaussian_view_colors(scene, cam):
    """SH colors of every Gaussian evaluated at its own viewing direction."""
    d = scene.positions.astype(np.float64) - cam.center
    n = np.linalg.norm(d, axis=1, keepdims=True)
    d = np.divide(d, n, out=np.tile(np.array([0.0, 0.0, 1.0]), (len(scene), 1)), where=n > 0)
    return sh_colors(scene.sh, d, offset_enabled=scene.sh_offset_enabled)


def rasterize_color(scene, cam, threads=None):
    """Render the scene's SH colors over its background color."""
    colors = per_gaussian_view_colors(scene, cam)
    img, _ = rasterize_features(scene, cam, colors, background=scene.background, threads=threads)
    return img


def rasterize_depth(scene, cam, alpha_threshold=0.5, threads=None):
    """Expected camera-z per pixel. Returns (depth, alpha, valid)."""
    z = scene.positions @ cam.R.T[:, 2] + cam.t[2]
    img, alpha = rasterize_features(scene, cam, z.astype(np.float32)[:, None], threads=threads)
    valid = alpha >= np.float32(alpha_threshold)
    depth = np.zeros_like(alpha)
    np.divide(img[:, :, 0], alpha, out=depth, where=valid)
    return depth, alpha, valid


def rasterize_features_grad(scene, cam, residual):
    """Adjoint of rasterize_features: d(sum(out * residual))/d(feats), (P, C).

    Runs single-threaded for a deterministic accumulation order.
    """
    residual = np.ascontiguousarray(residual, dtype=np.float32)
    batch = project_scene(scene, cam)
    kern = backend.get_backend()
    grad_sorted = kern.composite_adjoint(
        np.ascontiguousarray(batch.means2d),
        np.ascontiguousarray(batch.conics),
        np.ascontiguousarray(batch.opacities),
        residual,
        np.ascontiguousarray(batch.tile_offsets),
        np.ascontiguousarray(batch.tile_splats),
        batch.tiles_x, batch.tiles_y, len(batch),
    )
    grad = np.zeros((len(scene), residual.shape[2]), dtype=np.float32)
    grad[batch.indices] = grad_sorted
    return grad

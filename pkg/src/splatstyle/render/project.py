"""EWA projection of 3D Gaussians to screen-space splats, plus tile binning.

All per-splat preprocessing lives here in shared numpy code so the compiled
and fallback compositing kernels consume identical float32 inputs.
"""

from dataclasses import dataclass

import numpy as np

from ..scene import covariances

TILE = 16
BLUR_FLOOR = 0.3        # isotropic px^2 added to every 2D covariance
ALPHA_CLAMP = 0.99
T_STOP = 1e-4           # transmittance early-out


@dataclass
class Splat2D:
    """One projected Gaussian."""

    mean2d: np.ndarray  # (2,) pixel coords
    cov2d: np.ndarray   # (2, 2) SPD, blur floor included
    depth: float        # camera-z
    index: int          # source Gaussian index


@dataclass
class SplatBatch:
    """Depth-sorted screen-space splats with per-tile CSR lists."""

    means2d: np.ndarray    # (K, 2) f32, pixel coords
    conics: np.ndarray     # (K, 3) f32, inverse 2D covariance (a, b, c)
    cov2d: np.ndarray      # (K, 3) f32, 2D covariance (a, b, c)
    depths: np.ndarray     # (K,) f32 camera-z
    opacities: np.ndarray  # (K,) f32
    indices: np.ndarray    # (K,) i32 source Gaussian index
    tile_offsets: np.ndarray  # (ntiles+1,) i64
    tile_splats: np.ndarray   # (-,) i32 positions into the sorted arrays
    tiles_x: int
    tiles_y: int
    width: int
    height: int

    def __len__(self):
        return self.means2d.shape[0]


def project_points(cam, pts):
    """World points -> (uv (N,2), z (N,)) in pixel coords / camera depth."""
    pc = cam.world_to_cam(pts)
    z = pc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.fx * pc[:, 0] / z + cam.cx
        v = cam.fy * pc[:, 1] / z + cam.cy
    return np.stack([u, v], axis=1), z


def project_scene(scene, cam):
    """Project every Gaussian; cull by depth and 3-sigma footprint.

    Returns a SplatBatch sorted front-to-back (stable index tie-break).
    """
    P = len(scene)
    if P == 0:
        return _empty_batch(cam)
    pc = cam.world_to_cam(scene.positions)
    x, y, z = pc[:, 0], pc[:, 1], pc[:, 2]
    in_depth = (z > cam.near) & (z < cam.far)

    zs = np.where(in_depth, z, 1.0)
    u = cam.fx * x / zs + cam.cx
    v = cam.fy * y / zs + cam.cy

    # cov2d = J W Sigma W^T J^T + blur floor
    Sigma = covariances(scene)
    W = cam.R
    Vc = np.einsum("ij,njk,lk->nil", W, Sigma, W)
    iz = 1.0 / zs
    iz2 = iz * iz
    j00 = cam.fx * iz
    j02 = -cam.fx * x * iz2
    j11 = cam.fy * iz
    j12 = -cam.fy * y * iz2
    # rows of J: (j00, 0, j02), (0, j11, j12)
    a00 = j00 * Vc[:, 0, 0] + j02 * Vc[:, 2, 0]
    a01 = j00 * Vc[:, 0, 1] + j02 * Vc[:, 2, 1]
    a02 = j00 * Vc[:, 0, 2] + j02 * Vc[:, 2, 2]
    b10 = j11 * Vc[:, 1, 0] + j12 * Vc[:, 2, 0]
    b11 = j11 * Vc[:, 1, 1] + j12 * Vc[:, 2, 1]
    b12 = j11 * Vc[:, 1, 2] + j12 * Vc[:, 2, 2]
    cA = a00 * j00 + a02 * j02 + BLUR_FLOOR
    cB = a01 * j11 + a02 * j12
    cC = b11 * j11 + b12 * j12 + BLUR_FLOOR

    # 3-sigma radius from the larger eigenvalue of [[cA, cB], [cB, cC]]
    mid = 0.5 * (cA + cC)
    disc = np.sqrt(np.maximum(mid * mid - (cA * cC - cB * cB), 0.0))
    radius = 3.0 * np.sqrt(np.maximum(mid + disc, 0.0))

    on_image = (
        (u + radius > 0.0) & (u - radius < cam.width)
        & (v + radius > 0.0) & (v - radius < cam.height)
    )
    keep = in_depth & on_image
    idx = np.nonzero(keep)[0]
    if idx.size == 0:
        return _empty_batch(cam)

    order = idx[np.argsort(z[idx], kind="stable")]
    det = cA * cC - cB * cB
    inv_det = 1.0 / det
    conics = np.stack([cC * inv_det, -cB * inv_det, cA * inv_det], axis=1)
    cov2d = np.stack([cA, cB, cC], axis=1)

    batch = _bin_tiles(
        means2d=np.stack([u, v], axis=1)[order].astype(np.float32),
        conics=conics[order].astype(np.float32),
        cov2d=cov2d[order].astype(np.float32),
        depths=z[order].astype(np.float32),
        opacities=scene.opacities[order].astype(np.float32),
        indices=order.astype(np.int32),
        radius=radius[order],
        cam=cam,
    )
    return batch


def project_gaussian(scene, cam, index):
    """Project a single Gaussian; None when culled."""
    sub = scene.copy(
        positions=scene.positions[index : index + 1],
        rotations=scene.rotations[index : index + 1],
        scales=scene.scales[index : index + 1],
        opacities=scene.opacities[index : index + 1],
        sh=scene.sh[index : index + 1],
        features=None,
    )
    batch = project_scene(sub, cam)
    if len(batch) == 0:
        return None
    a, b, c = batch.cov2d[0].astype(np.float64)
    return Splat2D(
        mean2d=batch.means2d[0].astype(np.float64),
        cov2d=np.array([[a, b], [b, c]]),
        depth=float(batch.depths[0]),
        index=index,
    )


def _empty_batch(cam):
    tiles_x = (cam.width + TILE - 1) // TILE
    tiles_y = (cam.height + TILE - 1) // TILE
    return SplatBatch(
        means2d=np.zeros((0, 2), np.float32),
        conics=np.zeros((0, 3), np.float32),
        cov2d=np.zeros((0, 3), np.float32),
        depths=np.zeros(0, np.float32),
        opacities=np.zeros(0, np.float32),
        indices=np.zeros(0, np.int32),
        tile_offsets=np.zeros(tiles_x * tiles_y + 1, np.int64),
        tile_splats=np.zeros(0, np.int32),
        tiles_x=tiles_x,
        tiles_y=tiles_y,
        width=cam.width,
        height=cam.height,
    )


def _bin_tiles(means2d, conics, cov2d, depths, opacities, indices, radius, cam):
    """Conservative 3-sigma AABB binning; per-tile lists stay depth-ordered."""
    tiles_x = (cam.width + TILE - 1) // TILE
    tiles_y = (cam.height + TILE - 1) // TILE
    u, v = means2d[:, 0].astype(np.float64), means2d[:, 1].astype(np.float64)
    tx0 = np.clip(np.floor((u - radius) / TILE), 0, tiles_x - 1).astype(np.int64)
    tx1 = np.clip(np.floor((u + radius) / TILE), 0, tiles_x - 1).astype(np.int64)
    ty0 = np.clip(np.floor((v - radius) / TILE), 0, tiles_y - 1).astype(np.int64)
    ty1 = np.clip(np.floor((v + radius) / TILE), 0, tiles_y - 1).astype(np.int64)
    nx = tx1 - tx0 + 1
    ny = ty1 - ty0 + 1
    counts = nx * ny
    total = int(counts.sum())

    splat_pos = np.repeat(np.arange(len(u), dtype=np.int32), counts)
    # per-splat local tile enumeration in row-major order
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    local = np.arange(total, dtype=np.int64) - np.repeat(starts, counts)
    nx_r = np.repeat(nx, counts)
    lx = local % nx_r
    ly = local // nx_r
    tile_ids = (np.repeat(ty0, counts) + ly) * tiles_x + np.repeat(tx0, counts) + lx

    sort = np.argsort(tile_ids, kind="stable")
    tile_splats = splat_pos[sort]
    tile_offsets = np.zeros(tiles_x * tiles_y + 1, dtype=np.int64)
    np.cumsum(np.bincount(tile_ids, minlength=tiles_x * tiles_y), out=tile_offsets[1:])

    return SplatBatch(
        means2d=means2d, conics=conics, cov2d=cov2d, depths=depths,
        opacities=opacities, indices=indices, tile_offsets=tile_offsets,
        tile_splats=tile_splats, tiles_x=tiles_x, tiles_y=tiles_y,
        width=cam.width, height=cam.height,
    )

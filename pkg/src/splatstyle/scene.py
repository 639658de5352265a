"""In-memory Gaussian scene: activations, SH color, and DC rewrite."""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .gaussian_ply import RawGaussians

# Real spherical-harmonics constants, degree 0..3 (3DGS convention).
C_SH = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)


class SceneError(Exception):
    pass


@dataclass
class GaussianScene:
    """Activated Gaussian scene. Arrays are one row per primitive.

    sh holds the 3x16 coefficient matrix per Gaussian: column 0 is the DC
    term, columns 1..15 the higher orders. features is an optional (P, 16)
    semantic code array covering every primitive or absent entirely.
    """

    positions: np.ndarray            # (P, 3)
    rotations: np.ndarray            # (P, 4) unit quaternions, w first
    scales: np.ndarray               # (P, 3) positive linear scales
    opacities: np.ndarray            # (P,) in (0, 1)
    sh: np.ndarray                   # (P, 3, 16)
    features: np.ndarray | None = None  # (P, 16) or None
    sh_offset_enabled: bool = True
    background: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.float32))

    def __post_init__(self):
        self.background = np.asarray(self.background, dtype=np.float32)
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=np.float32)
            if self.features.shape[0] != len(self):
                raise SceneError("semantic features must cover every primitive")

    def __len__(self):
        return self.positions.shape[0]

    @property
    def has_semantic(self):
        return self.features is not None

    def copy(self, **changes):
        out = replace(self, **changes)
        return out


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def activate(raw: RawGaussians, sh_offset_enabled=True, background=(0.0, 0.0, 0.0)):
    """Raw PLY records -> activated scene (exp scales, sigmoid opacity, unit quats)."""
    m = raw.to_matrix()
    if not np.all(np.isfinite(m)):
        raise SceneError("non-finite value in raw Gaussian records")
    norms = np.linalg.norm(raw.rotation, axis=1)
    if np.any(norms == 0):
        raise SceneError("zero-norm quaternion")
    q = (raw.rotation / norms[:, None]).astype(np.float32)
    s = np.exp(raw.log_scale).astype(np.float32)
    op = _sigmoid(raw.opacity_logit.astype(np.float64)).astype(np.float32)
    p = raw.positions.shape[0]
    sh = np.zeros((p, 3, 16), dtype=np.float32)
    sh[:, :, 0] = raw.f_dc
    sh[:, :, 1:] = raw.f_rest.reshape(p, 3, 15)
    return GaussianScene(
        positions=raw.positions.astype(np.float32),
        rotations=q,
        scales=s,
        opacities=op,
        sh=sh,
        sh_offset_enabled=sh_offset_enabled,
        background=np.asarray(background, dtype=np.float32),
    )


def deactivate(scene: GaussianScene):
    """Inverse of activate (up to quaternion normalization)."""
    p = len(scene)
    op = np.clip(scene.opacities.astype(np.float64), 1e-12, 1 - 1e-12)
    return RawGaussians(
        positions=scene.positions.astype(np.float32),
        normals=np.zeros((p, 3), dtype=np.float32),
        f_dc=scene.sh[:, :, 0].astype(np.float32),
        f_rest=scene.sh[:, :, 1:].reshape(p, 45).astype(np.float32),
        opacity_logit=np.log(op / (1.0 - op)).astype(np.float32),
        log_scale=np.log(scene.scales).astype(np.float32),
        rotation=scene.rotations.astype(np.float32),
    )


def quat_to_rotmat(q):
    """(N, 4) unit quaternions (w, x, y, z) -> (N, 3, 3) rotation matrices."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((q.shape[0], 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def covariances(scene: GaussianScene):
    """(P, 3, 3) world-space covariances R diag(s^2) R^T."""
    R = quat_to_rotmat(scene.rotations)
    s2 = scene.scales.astype(np.float64) ** 2
    return np.einsum("nij,nj,nkj->nik", R, s2, R)


def sh_basis_rest(dirs):
    """Degree 1..3 real-SH basis values (with constants folded in), (N, 15)."""
    d = np.asarray(dirs, dtype=np.float64)
    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    xx, yy, zz = x * x, y * y, z * z
    xy, yz, xz = x * y, y * z, x * z
    b = np.empty((d.shape[0], 15))
    b[:, 0] = -SH_C1 * y
    b[:, 1] = SH_C1 * z
    b[:, 2] = -SH_C1 * x
    b[:, 3] = SH_C2[0] * xy
    b[:, 4] = SH_C2[1] * yz
    b[:, 5] = SH_C2[2] * (2.0 * zz - xx - yy)
    b[:, 6] = SH_C2[3] * xz
    b[:, 7] = SH_C2[4] * (xx - yy)
    b[:, 8] = SH_C3[0] * y * (3.0 * xx - yy)
    b[:, 9] = SH_C3[1] * xy * z
    b[:, 10] = SH_C3[2] * y * (4.0 * zz - xx - yy)
    b[:, 11] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
    b[:, 12] = SH_C3[4] * x * (4.0 * zz - xx - yy)
    b[:, 13] = SH_C3[5] * z * (xx - yy)
    b[:, 14] = SH_C3[6] * x * (xx - 3.0 * yy)
    return b


def _check_unit(dirs):
    norms = np.linalg.norm(np.asarray(dirs, dtype=np.float64), axis=-1)
    dev = np.abs(norms - 1.0)
    if np.any(dev > 1e-3):
        raise SceneError(f"view direction deviates from unit norm by {dev.max():.2e}")
    if np.any(dev > 1e-6):
        warnings.warn("view directions re-normalized (deviation above 1e-6)")
    return np.asarray(dirs, dtype=np.float64) / norms[..., None]


def sh_colors(sh, dirs, offset_enabled=True):
    """Evaluate per-Gaussian colors: DC term plus view-dependent SH terms.

    sh is (P, 3, 16); dirs is (P, 3) unit view directions. Returns (P, 3).
    """
    sh = np.asarray(sh, dtype=np.float64)
    d = _check_unit(dirs)
    diff = sh[:, :, 0] * C_SH
    if offset_enabled:
        diff = diff + 0.5
    spec = np.einsum("pck,pk->pc", sh[:, :, 1:], sh_basis_rest(d))
    return (diff + spec).astype(np.float32)


def diffuse_colors(scene: GaussianScene):
    """View-independent base colors (P, 3)."""
    diff = scene.sh[:, :, 0].astype(np.float64) * C_SH
    if scene.sh_offset_enabled:
        diff = diff + 0.5
    return diff.astype(np.float32)


def update_dc(scene: GaussianScene, stylized_diffuse, zero_rest=False):
    """Rewrite the SH DC columns so diffuse colors equal stylized_diffuse."""
    cdiff = np.asarray(stylized_diffuse, dtype=np.float64)
    if cdiff.shape != (len(scene), 3):
        raise SceneError(f"expected {(len(scene), 3)} stylized colors, got {cdiff.shape}")
    if scene.sh_offset_enabled:
        cdiff = cdiff - 0.5
    sh = scene.sh.copy()
    sh[:, :, 0] = (cdiff / C_SH).astype(np.float32)
    if zero_rest:
        sh[:, :, 1:] = 0.0
    return scene.copy(sh=sh)

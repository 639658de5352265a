import numpy as np
import pytest

from splatstyle.cameras import Camera
from splatstyle.scene import GaussianScene


def random_quats(rng, n):
    q = rng.standard_normal((n, 4))
    return (q / np.linalg.norm(q, axis=1, keepdims=True)).astype(np.float32)


def make_random_scene(rng, n=200, z_range=(3.0, 8.0), scale_range=(0.05, 0.3),
                      with_features=False):
    scene = GaussianScene(
        positions=np.column_stack([
            rng.uniform(-2, 2, n), rng.uniform(-2, 2, n),
            rng.uniform(*z_range, n),
        ]).astype(np.float32),
        rotations=random_quats(rng, n),
        scales=rng.uniform(*scale_range, (n, 3)).astype(np.float32),
        opacities=rng.uniform(0.2, 0.95, n).astype(np.float32),
        sh=(rng.standard_normal((n, 3, 16)) * 0.3).astype(np.float32),
        features=rng.standard_normal((n, 16)).astype(np.float32) if with_features else None,
    )
    return scene


def isotropic_scene(positions, sigma, opacity, colors=None, features=None):
    """Axis-aligned isotropic Gaussians, handy for hand-computed cases."""
    positions = np.atleast_2d(np.asarray(positions, dtype=np.float32))
    n = positions.shape[0]
    quats = np.zeros((n, 4), dtype=np.float32)
    quats[:, 0] = 1.0
    sh = np.zeros((n, 3, 16), dtype=np.float32)
    if colors is not None:
        from splatstyle.scene import C_SH
        sh[:, :, 0] = (np.atleast_2d(colors) - 0.5) / C_SH
    return GaussianScene(
        positions=positions,
        rotations=quats,
        scales=np.full((n, 3), sigma, dtype=np.float32),
        opacities=np.full(n, opacity, dtype=np.float32),
        sh=sh,
        features=features,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_cam():
    return Camera(fx=100.0, fy=100.0, cx=32.5, cy=24.5, width=64, height=48)

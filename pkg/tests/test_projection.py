import numpy as np
import pytest

from splatstyle.cameras import Camera, CameraError, look_at
from splatstyle.render.project import BLUR_FLOOR, project_gaussian, project_scene
from tests.conftest import isotropic_scene, make_random_scene


def test_camera_validation():
    with pytest.raises(CameraError):
        Camera(fx=-1, fy=1, cx=0, cy=0, width=8, height=8)
    with pytest.raises(CameraError):
        Camera(fx=1, fy=1, cx=0, cy=0, width=8, height=8, near=2.0, far=1.0)
    with pytest.raises(CameraError):
        Camera(fx=1, fy=1, cx=0, cy=0, width=8, height=8, R=np.eye(3) * 2)


def test_camera_json_round_trip(tmp_path):
    cam = look_at([1, 2, -3], [0, 0, 4], fx=80, fy=90, cx=32, cy=24, width=64, height=48)
    from splatstyle.cameras import load_camera, save_camera
    path = tmp_path / "cam.json"
    save_camera(cam, path)
    back = load_camera(path)
    np.testing.assert_allclose(back.R, cam.R, atol=1e-12)
    np.testing.assert_allclose(back.t, cam.t, atol=1e-12)
    assert (back.fx, back.width) == (cam.fx, cam.width)


def test_behind_camera_culled(small_cam):
    scene = isotropic_scene([[0.0, 0.0, -5.0]], 0.2, 0.9)
    assert project_gaussian(scene, small_cam, 0) is None
    assert len(project_scene(scene, small_cam)) == 0


def test_outside_frustum_culled(small_cam):
    scene = isotropic_scene([[100.0, 0.0, 5.0]], 0.01, 0.9)
    assert project_gaussian(scene, small_cam, 0) is None


def test_on_axis_isotropic_cov(small_cam):
    s, z = 0.25, 4.0
    scene = isotropic_scene([[0.0, 0.0, z]], s, 0.9)
    splat = project_gaussian(scene, small_cam, 0)
    expected = (small_cam.fx * s / z) ** 2
    np.testing.assert_allclose(
        splat.cov2d, np.eye(2) * (expected + BLUR_FLOOR), rtol=1e-5)
    np.testing.assert_allclose(splat.mean2d, [small_cam.cx, small_cam.cy], atol=1e-6)
    assert splat.depth == pytest.approx(z)


def test_rigid_invariance(rng, small_cam):
    scene = make_random_scene(rng, n=30)
    t = np.array([0.4, -1.2, 0.7])
    moved = scene.copy(positions=(scene.positions + t).astype(np.float32))
    cam2 = Camera(fx=small_cam.fx, fy=small_cam.fy, cx=small_cam.cx, cy=small_cam.cy,
                  width=small_cam.width, height=small_cam.height,
                  R=small_cam.R, t=small_cam.t - small_cam.R @ t)
    a = project_scene(scene, small_cam)
    b = project_scene(moved, cam2)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_allclose(a.means2d, b.means2d, atol=1e-4)
    np.testing.assert_allclose(a.conics, b.conics, rtol=1e-4)
    np.testing.assert_allclose(a.depths, b.depths, rtol=1e-6)


def test_depth_sort_front_to_back(rng, small_cam):
    scene = make_random_scene(rng, n=100)
    batch = project_scene(scene, small_cam)
    assert np.all(np.diff(batch.depths) >= 0)


def test_tile_lists_cover_footprints(rng, small_cam):
    scene = make_random_scene(rng, n=50)
    batch = project_scene(scene, small_cam)
    # every splat present in the tile containing its mean
    from splatstyle.render.project import TILE
    for k in range(len(batch)):
        u, v = batch.means2d[k]
        if not (0 <= u < small_cam.width and 0 <= v < small_cam.height):
            continue
        tid = int(v // TILE) * batch.tiles_x + int(u // TILE)
        lo, hi = batch.tile_offsets[tid], batch.tile_offsets[tid + 1]
        assert k in batch.tile_splats[lo:hi]

import numpy as np
import pytest

from splatstyle.guided_filter import box_filter, guided_filter


def naive_box_mean(img, r):
    h, w = img.shape
    out = np.empty_like(img, dtype=np.float64)
    for i in range(h):
        for j in range(w):
            win = img[max(0, i - r):i + r + 1, max(0, j - r):j + r + 1]
            out[i, j] = win.mean()
    return out


def test_box_filter_matches_naive(rng):
    img = rng.random((20, 17))
    for r in (1, 3, 5):
        counts = box_filter(np.ones_like(img), r)
        np.testing.assert_allclose(box_filter(img, r) / counts, naive_box_mean(img, r),
                                   atol=1e-10)


def test_radius_zero_identity(rng):
    guide = rng.random((12, 12, 3))
    src = rng.random((12, 12, 2))
    np.testing.assert_array_equal(guided_filter(guide, src, 0, 1e-2), src)


def test_constant_src_unchanged(rng):
    guide = rng.random((16, 16, 3))
    src = np.full((16, 16), 0.37)
    out = guided_filter(guide, src, 3, 1e-2)
    np.testing.assert_allclose(out, 0.37, atol=1e-10)


def test_huge_eps_on_linear_ramp_equals_box_mean(rng):
    # a linear ramp is a fixed point of box-mean at interior pixels, so with
    # eps -> inf (a -> 0, b -> box-mean) the output equals box-mean there
    h, w, r = 24, 24, 2
    ramp = np.linspace(0, 1, w)[None, :] + np.linspace(0, 0.5, h)[:, None]
    guide = rng.random((h, w, 3))
    out = guided_filter(guide, ramp, r, 1e9)
    oracle = naive_box_mean(ramp, r)
    np.testing.assert_allclose(out[2 * r:-2 * r, 2 * r:-2 * r],
                               oracle[2 * r:-2 * r, 2 * r:-2 * r], atol=1e-3)


def test_huge_eps_random_src_double_box(rng):
    # with a ~= 0 the filter output is box-mean applied to b = box-mean(src)
    src = rng.random((18, 18))
    guide = rng.random((18, 18, 3))
    out = guided_filter(guide, src, 2, 1e9)
    oracle = naive_box_mean(naive_box_mean(src, 2), 2)
    np.testing.assert_allclose(out, oracle, atol=1e-3)


def test_mean_preservation(rng):
    guide = rng.random((40, 40, 3))
    src = rng.random((40, 40, 3))
    for r in (2, 4, 8):
        out = guided_filter(guide, src, r, 1e-3)
        assert abs(out.mean() - src.mean()) <= 0.01 * abs(src.mean())


def test_validation(rng):
    with pytest.raises(ValueError):
        guided_filter(np.ones((4, 4, 3)), np.ones((4, 4)), -1, 1e-2)
    with pytest.raises(ValueError):
        guided_filter(np.ones((4, 4, 3)), np.ones((4, 4)), 1, 0.0)
    with pytest.raises(ValueError):
        guided_filter(np.ones((4, 4, 3)), np.ones((5, 4)), 1, 1e-2)

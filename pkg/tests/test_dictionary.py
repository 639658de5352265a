import numpy as np
import pytest

from splatstyle.dictionary import (
    DictionaryError,
    ReferenceBundle,
    build_dictionary,
    build_scribble_dictionary,
    dictionary_from_tensorfile,
    dictionary_to_tensorfile,
    kmeans,
    kmeans_sse,
    resample_labels_nearest,
)
from splatstyle.nets import distill_mlp_vgg, mlp_vgg_forward, random_vgg_slice, vgg_slice_forward
from splatstyle.synth import make_reference_image


def naive_lloyd(points, m, rng, iters=30):
    centroids = points[rng.choice(len(points), m, replace=False)].astype(np.float64)
    labels = np.zeros(len(points), dtype=int)
    for _ in range(iters):
        d = np.linalg.norm(points[:, None] - centroids[None], axis=2)
        labels = d.argmin(axis=1)
        for j in range(m):
            if np.any(labels == j):
                centroids[j] = points[labels == j].mean(axis=0)
    return labels, centroids


def test_kmeans_single_cluster_is_mean(rng):
    pts = rng.standard_normal((50, 4))
    labels, cents = kmeans(pts, 1, seed=0)
    np.testing.assert_array_equal(labels, 0)
    np.testing.assert_allclose(cents[0], pts.mean(axis=0), atol=1e-5)


def test_kmeans_separated_clumps_exact(rng):
    clumps = np.array([[0.0, 0.0], [100.0, 0.0], [0.0, 100.0]])
    pts = np.concatenate([c + rng.standard_normal((30, 2)) * 0.1 for c in clumps])
    labels, cents = kmeans(pts, 3, seed=3)
    for k in range(3):
        block = labels[30 * k:30 * (k + 1)]
        assert np.all(block == block[0])
        np.testing.assert_allclose(cents[block[0]], pts[30 * k:30 * (k + 1)].mean(axis=0),
                                   atol=1e-4)


def test_kmeans_sse_close_to_restart_oracle(rng):
    pts = rng.standard_normal((64, 2))
    labels, cents = kmeans(pts, 3, seed=11)
    ours = kmeans_sse(pts, labels, cents)
    best = np.inf
    for trial in range(300):
        trial_rng = np.random.default_rng(trial)
        lab, cen = naive_lloyd(pts, 3, trial_rng)
        best = min(best, kmeans_sse(pts, lab, cen.astype(np.float32)))
    assert ours <= best * 1.05


def test_kmeans_sse_non_increasing_over_iterations(rng):
    pts = rng.standard_normal((200, 3))
    sses = []
    for iters in range(1, 8):
        labels, cents = kmeans(pts, 4, seed=5, max_iters=iters)
        sses.append(kmeans_sse(pts, labels, cents))
    assert all(b <= a + 1e-9 for a, b in zip(sses, sses[1:]))


def test_kmeans_deterministic(rng):
    pts = rng.standard_normal((100, 5))
    a = kmeans(pts, 4, seed=9)
    b = kmeans(pts, 4, seed=9)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_kmeans_rejects_n_below_m(rng):
    with pytest.raises(DictionaryError):
        kmeans(rng.standard_normal((3, 2)), 4)


def test_resample_nearest_preserves_regions():
    labels = np.array([[0, 0, 1, 1], [0, 0, 1, 1]])
    up = resample_labels_nearest(labels, 4, 8)
    assert up.shape == (4, 8)
    np.testing.assert_array_equal(np.unique(up[:, :4]), [0])
    np.testing.assert_array_equal(np.unique(up[:, 4:]), [1])


def test_single_ref_single_cluster_global_stats(rng):
    w = random_vgg_slice(rng)
    ref, _, _ = make_reference_image(regions=2, vgg_weights=w, noise=0.05, seed=4)
    d = build_dictionary([ref], m=1, seed=0)
    assert len(d) == 1
    np.testing.assert_allclose(
        d.keys[0], ref.semantic_map.reshape(-1, 384).mean(axis=0), atol=1e-4)
    flat = ref.vgg_map.reshape(-1, 128).astype(np.float64)
    np.testing.assert_allclose(d.mus[0], flat.mean(axis=0), atol=1e-5)
    np.testing.assert_allclose(d.sigmas[0], flat.std(axis=0), atol=1e-5)


def test_two_refs_cardinality_and_provenance(rng):
    w = random_vgg_slice(rng)
    refs = [make_reference_image(regions=3, vgg_weights=w, noise=0.1, seed=s)[0]
            for s in (1, 2)]
    d = build_dictionary(refs, m=10, seed=0)
    assert len(d) <= 20
    assert set(d.provenance[:, 0]) == {0, 1}
    assert np.all(d.sigmas >= 0)
    assert np.all(np.isfinite(d.keys))


def test_flat_regions_give_zero_sigma_and_mlp_mu(rng):
    # semantic labels mark a border class so interior clusters are pure
    w = random_vgg_slice(rng)
    colors = np.array([[0.8, 0.2, 0.1], [0.1, 0.3, 0.9]], dtype=np.float32)
    ref, _, _ = make_reference_image(regions=2, palette=colors, hw=(64, 64),
                                     sem_hw=(32, 32), vgg_weights=w)
    # border label = 2 wherever the VGG receptive field crosses a boundary
    sem = ref.semantic_map.copy()
    border = np.zeros((32, 32), dtype=bool)
    border[:3, :] = border[-3:, :] = True
    border[:, :3] = border[:, -3:] = True
    border[:, 13:19] = True
    codes = np.zeros((3, 384), dtype=np.float32)
    codes[0, 0] = codes[1, 1] = codes[2, 2] = 10.0
    labels = np.where(border, 2, np.where(np.arange(32)[None, :] < 16, 0, 1))
    sem = codes[labels]
    ref2 = ReferenceBundle(image=ref.image, semantic_map=sem, vgg_map=ref.vgg_map)
    d = build_dictionary([ref2], m=3, seed=0)
    assert len(d) == 3
    mlp = distill_mlp_vgg(w)
    expected = mlp_vgg_forward(colors, mlp)
    # match entries to regions via their semantic keys
    for region in (0, 1):
        entry = int(np.argmax(d.keys[:, region]))
        np.testing.assert_allclose(d.sigmas[entry], 0.0, atol=1e-3)
        np.testing.assert_allclose(d.mus[entry], expected[region], atol=1e-3)


def test_scribble_identical_image_matches_build(rng):
    w = random_vgg_slice(rng)
    ref, _, _ = make_reference_image(regions=2, vgg_weights=w, noise=0.08, seed=6)
    direct = build_dictionary([ref], m=4, seed=3)
    scribbled = build_scribble_dictionary(ref.semantic_map, ref.vgg_map, m=4, seed=3)
    np.testing.assert_allclose(scribbled.keys, direct.keys, atol=1e-5)
    np.testing.assert_allclose(scribbled.mus, direct.mus, atol=1e-5)
    np.testing.assert_allclose(scribbled.sigmas, direct.sigmas, atol=1e-5)


def test_scribble_flat_red_single_cluster(rng):
    w = random_vgg_slice(rng)
    red = np.broadcast_to(np.array([0.9, 0.05, 0.05], np.float32), (64, 64, 3)).copy()
    vgg_red = vgg_slice_forward(red, w)
    sem = rng.standard_normal((32, 32, 384)).astype(np.float32)
    d = build_scribble_dictionary(sem, vgg_red, m=1, seed=0)
    flat = vgg_red.reshape(-1, 128).astype(np.float64)
    np.testing.assert_allclose(d.mus[0], flat.mean(axis=0), atol=1e-5)
    np.testing.assert_allclose(d.sigmas[0], flat.std(axis=0), atol=1e-5)


def test_scribble_untouched_cluster_keeps_region_stats(rng):
    # scribbling region 1 must not disturb region 0's statistics
    w = random_vgg_slice(rng)
    ref, _, _ = make_reference_image(regions=2, hw=(64, 64), sem_hw=(32, 32),
                                     vgg_weights=w)
    scribbled = ref.image.copy()
    scribbled[:, 40:] = [0.1, 0.9, 0.2]  # paint the right (region 1) half only
    vgg_scr = vgg_slice_forward(scribbled, w)
    base = build_scribble_dictionary(ref.semantic_map, ref.vgg_map, m=2, seed=1)
    after = build_scribble_dictionary(ref.semantic_map, vgg_scr, m=2, seed=1)
    np.testing.assert_array_equal(base.keys, after.keys)
    left = int(np.argmax(base.keys[:, 0]))
    right = 1 - left
    np.testing.assert_allclose(after.mus[left], base.mus[left], atol=2e-2)
    assert np.abs(after.mus[right] - base.mus[right]).max() > 0.05


def test_scribble_aspect_mismatch_rejected(rng):
    with pytest.raises(DictionaryError):
        build_scribble_dictionary(np.zeros((32, 32, 384), np.float32),
                                  np.zeros((16, 32, 128), np.float32), m=1)


def test_dictionary_tensorfile_round_trip(rng):
    w = random_vgg_slice(rng)
    ref, _, _ = make_reference_image(regions=2, vgg_weights=w, noise=0.1, seed=2)
    d = build_dictionary([ref], m=3, seed=0)
    back = dictionary_from_tensorfile(dictionary_to_tensorfile(d))
    np.testing.assert_array_equal(back.keys, d.keys)
    np.testing.assert_array_equal(back.mus, d.mus)
    np.testing.assert_array_equal(back.sigmas, d.sigmas)
    np.testing.assert_array_equal(back.provenance, d.provenance)


def test_same_seed_identical_dictionaries(rng):
    w = random_vgg_slice(rng)
    refs = [make_reference_image(regions=2, vgg_weights=w, noise=0.1, seed=s)[0]
            for s in (1, 2)]
    a = build_dictionary(refs, m=5, seed=42)
    b = build_dictionary(refs, m=5, seed=42)
    assert np.array_equal(a.keys, b.keys) and np.array_equal(a.mus, b.mus)
    assert np.array_equal(a.sigmas, b.sigmas)

"""Reference clustering and the semantic-keyed style dictionary.

Each reference image contributes up to M entries: the key is a cluster
centroid of its semantic map, the value the (mean, std) of the VGG
features falling inside that cluster's footprint.
"""

from dataclasses import dataclass

import numpy as np

from .tensorfile import TensorFile

SEMANTIC_DIM = 384
STYLE_DIM = 128


class DictionaryError(Exception):
    pass


@dataclass
class ReferenceBundle:
    image: np.ndarray         # (H, W, 3) in [0, 1]
    semantic_map: np.ndarray  # (Hs, Ws, 384)
    vgg_map: np.ndarray       # (H/2, W/2, 128)

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float32)
        self.semantic_map = np.asarray(self.semantic_map, dtype=np.float32)
        self.vgg_map = np.asarray(self.vgg_map, dtype=np.float32)
        for name in ("image", "semantic_map", "vgg_map"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DictionaryError(f"non-finite values in {name}")


@dataclass
class StyleDictionary:
    keys: np.ndarray        # (T, 384) semantic centroids
    mus: np.ndarray         # (T, 128)
    sigmas: np.ndarray      # (T, 128), componentwise >= 0
    provenance: np.ndarray  # (T, 2) int32 (ref index, cluster index)

    def __post_init__(self):
        self.keys = np.asarray(self.keys, dtype=np.float32)
        self.mus = np.asarray(self.mus, dtype=np.float32)
        self.sigmas = np.asarray(self.sigmas, dtype=np.float32)
        self.provenance = np.asarray(self.provenance, dtype=np.int32)
        if len(self) == 0:
            raise DictionaryError("empty style dictionary")
        if np.any(self.sigmas < 0):
            raise DictionaryError("negative sigma in style dictionary")
        for name in ("keys", "mus", "sigmas"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DictionaryError(f"non-finite values in {name}")

    def __len__(self):
        return self.keys.shape[0]


def kmeans(points, m, seed=0, max_iters=50):
    """Lloyd's algorithm with k-means++ init. Returns (labels, centroids).

    Ties go to the lowest centroid index; empty clusters are reseeded to
    the point farthest from its assigned centroid.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if m < 1 or n < m:
        raise DictionaryError(f"kmeans needs N >= M >= 1, got N={n}, M={m}")
    rng = np.random.default_rng(seed)

    centroids = np.empty((m, pts.shape[1]))
    centroids[0] = pts[rng.integers(n)]
    d2 = np.sum((pts - centroids[0]) ** 2, axis=1)
    for j in range(1, m):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centroids[j] = pts[idx]
        d2 = np.minimum(d2, np.sum((pts - centroids[j]) ** 2, axis=1))

    labels = None
    for _ in range(max_iters):
        dist = _sq_dists(pts, centroids)
        new_labels = np.argmin(dist, axis=1)
        point_d2 = dist[np.arange(n), new_labels]
        for j in range(m):
            if not np.any(new_labels == j):
                far = int(np.argmax(point_d2))
                centroids[j] = pts[far]
                new_labels[far] = j
                point_d2[far] = -1.0
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(m):
            sel = labels == j
            if np.any(sel):
                centroids[j] = pts[sel].mean(axis=0)
    return labels.astype(np.int32), centroids.astype(np.float32)


def _sq_dists(pts, centroids):
    d = (np.sum(pts * pts, axis=1)[:, None]
         - 2.0 * pts @ centroids.T
         + np.sum(centroids * centroids, axis=1)[None, :])
    return np.maximum(d, 0.0)


def kmeans_sse(points, labels, centroids):
    pts = np.asarray(points, dtype=np.float64)
    return float(np.sum((pts - centroids[labels].astype(np.float64)) ** 2))


def resample_labels_nearest(labels, out_h, out_w):
    """Nearest-neighbor resampling of an integer label map."""
    in_h, in_w = labels.shape
    rows = np.minimum(((np.arange(out_h) + 0.5) * in_h / out_h).astype(np.int64), in_h - 1)
    cols = np.minimum(((np.arange(out_w) + 0.5) * in_w / out_w).astype(np.int64), in_w - 1)
    return labels[rows[:, None], cols[None, :]]


def _cluster_stats(vgg_map, labels_resampled, m):
    """Per-cluster population mean/std of the VGG vectors; None when empty."""
    flat_lab = labels_resampled.reshape(-1)
    flat_vgg = vgg_map.reshape(-1, vgg_map.shape[2]).astype(np.float64)
    out = []
    for j in range(m):
        sel = flat_lab == j
        if not np.any(sel):
            out.append(None)
            continue
        chunk = flat_vgg[sel]
        out.append((chunk.mean(axis=0).astype(np.float32),
                    chunk.std(axis=0).astype(np.float32)))
    return out


def build_dictionary(refs, m=10, seed=0):
    """Cluster every reference's semantic map and collect local style codes."""
    if not refs:
        raise DictionaryError("need at least one reference")
    keys, mus, sigmas, prov = [], [], [], []
    for i, ref in enumerate(refs):
        sem = ref.semantic_map
        if sem.ndim != 3 or sem.shape[2] != SEMANTIC_DIM:
            raise DictionaryError(f"ref {i}: semantic map shape {sem.shape}")
        hs, ws = sem.shape[:2]
        labels, centroids = kmeans(sem.reshape(-1, SEMANTIC_DIM), m, seed=[seed, i])
        lab_map = labels.reshape(hs, ws)
        hv, wv = ref.vgg_map.shape[:2]
        lab_v = resample_labels_nearest(lab_map, hv, wv)
        for j, stats in enumerate(_cluster_stats(ref.vgg_map, lab_v, m)):
            if stats is None:
                continue
            keys.append(centroids[j])
            mus.append(stats[0])
            sigmas.append(stats[1])
            prov.append((i, j))
    return StyleDictionary(keys=np.stack(keys), mus=np.stack(mus),
                           sigmas=np.stack(sigmas), provenance=np.array(prov))


def build_scribble_dictionary(rendered_semantic, scribbled_vgg, m, seed=0):
    """Keys from the rendered view's semantic clusters, values from the
    scribbled image's VGG features over the same regions."""
    sem = np.asarray(rendered_semantic, dtype=np.float32)
    vgg = np.asarray(scribbled_vgg, dtype=np.float32)
    if sem.ndim != 3 or sem.shape[2] != SEMANTIC_DIM:
        raise DictionaryError(f"rendered semantic map shape {sem.shape}")
    if vgg.ndim != 3 or vgg.shape[2] != STYLE_DIM:
        raise DictionaryError(f"scribbled VGG map shape {vgg.shape}")
    hs, ws = sem.shape[:2]
    hv, wv = vgg.shape[:2]
    if abs(hs * wv - ws * hv) > 0.05 * hs * wv:
        raise DictionaryError(
            f"aspect mismatch: semantic {hs}x{ws} vs VGG {hv}x{wv}")
    labels, centroids = kmeans(sem.reshape(-1, SEMANTIC_DIM), m, seed=[seed, 0])
    lab_v = resample_labels_nearest(labels.reshape(hs, ws), hv, wv)
    keys, mus, sigmas, prov = [], [], [], []
    for j, stats in enumerate(_cluster_stats(vgg, lab_v, m)):
        if stats is None:
            continue
        keys.append(centroids[j])
        mus.append(stats[0])
        sigmas.append(stats[1])
        prov.append((0, j))
    return StyleDictionary(keys=np.stack(keys), mus=np.stack(mus),
                           sigmas=np.stack(sigmas), provenance=np.array(prov))


def dictionary_to_tensorfile(d: StyleDictionary, tf=None):
    tf = tf if tf is not None else TensorFile()
    tf.add("dict.keys", d.keys)
    tf.add("dict.mus", d.mus)
    tf.add("dict.sigmas", d.sigmas)
    tf.add("dict.provenance", d.provenance.astype(np.float32))
    return tf


def dictionary_from_tensorfile(tf):
    return StyleDictionary(
        keys=tf["dict.keys"], mus=tf["dict.mus"], sigmas=tf["dict.sigmas"],
        provenance=tf["dict.provenance"].astype(np.int32))

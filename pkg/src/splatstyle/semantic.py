"""Scene-specific semantic autoencoder and per-Gaussian feature distillation.

The autoencoder compresses 384-d semantic features to 16-d codes that live
on the Gaussians; distillation fits those codes so rendered feature maps
match encoded target maps under an L1 objective (compositing is linear in
the features, so the adjoint gives the exact gradient).
"""

from dataclasses import dataclass

import numpy as np

from .adam import Adam
from .render import rasterize_features, rasterize_features_grad
from .tensorfile import TensorFile

ENC_DIMS = (384, 128, 64, 16)
DEC_DIMS = (16, 64, 128, 384)


class SemanticError(Exception):
    pass


@dataclass
class AutoencoderWeights:
    """Dense chains 384->128->64->16 and 16->64->128->384; ReLU between
    hidden layers, linear final layers. Weight layout (out, in)."""

    enc: list  # [(W, b), ...]
    dec: list

    def __post_init__(self):
        for chain, dims in ((self.enc, ENC_DIMS), (self.dec, DEC_DIMS)):
            if len(chain) != 3:
                raise SemanticError("encoder/decoder need 3 layers each")
            for i, (w, b) in enumerate(chain):
                if w.shape != (dims[i + 1], dims[i]) or b.shape != (dims[i + 1],):
                    raise SemanticError(
                        f"layer {i}: expected {(dims[i + 1], dims[i])}, got {w.shape}")


def random_autoencoder(rng):
    def chain(dims):
        return [
            ((rng.standard_normal((dims[i + 1], dims[i])) * np.sqrt(2.0 / dims[i]))
             .astype(np.float32), np.zeros(dims[i + 1], dtype=np.float32))
            for i in range(3)
        ]
    return AutoencoderWeights(enc=chain(ENC_DIMS), dec=chain(DEC_DIMS))


def _forward_chain(x, chain):
    h = x
    for i, (w, b) in enumerate(chain):
        h = h @ w.T + b
        if i < 2:
            h = np.maximum(h, 0.0)
    return h


def encode_rows(rows, weights: AutoencoderWeights):
    return _forward_chain(np.asarray(rows, dtype=np.float32), weights.enc)


def decode_features(codes, weights: AutoencoderWeights):
    return _forward_chain(np.asarray(codes, dtype=np.float32), weights.dec)


def encode_map(semantic_map, weights: AutoencoderWeights):
    m = np.asarray(semantic_map, dtype=np.float32)
    if m.ndim != 3 or m.shape[2] != ENC_DIMS[0]:
        raise SemanticError(f"expected HxWx384 map, got {m.shape}")
    return encode_rows(m.reshape(-1, m.shape[2]), weights).reshape(m.shape[0], m.shape[1], -1)


def decode_map(encoded_map, weights: AutoencoderWeights):
    m = np.asarray(encoded_map, dtype=np.float32)
    return decode_features(m.reshape(-1, m.shape[2]), weights).reshape(
        m.shape[0], m.shape[1], -1)


def _ae_step(x, layers, lam_cos):
    """Forward + hand-derived backward. Returns (loss, grads per layer)."""
    acts = [x]
    h = x
    for i, (w, b) in enumerate(layers):
        h = h @ w.T + b
        if i not in (2, 5):
            h = np.maximum(h, 0.0)
        acts.append(h)
    y = acts[-1]
    B = x.shape[0]
    d = y - x
    sq = np.sum(d * d, axis=1)
    ny = np.linalg.norm(y, axis=1, keepdims=True) + 1e-12
    nf = np.linalg.norm(x, axis=1, keepdims=True) + 1e-12
    cos = np.sum(y * x, axis=1, keepdims=True) / (ny * nf)
    loss = float(sq.mean() + lam_cos * (1.0 - cos).mean())

    gy = 2.0 * d / B
    if lam_cos:
        gy = gy - lam_cos * (x / (ny * nf) - cos * y / (ny * ny)) / B
    grads = [None] * 6
    g = gy
    for i in reversed(range(6)):
        w, b = layers[i]
        if i not in (2, 5):
            g = g * (acts[i + 1] > 0)
        grads[i] = (g.T @ acts[i], g.sum(axis=0))
        if i:
            g = g @ w
    return loss, grads


def train_autoencoder(maps, epochs=5, lr=1e-4, lam_cos=1.0, batch_size=512, seed=0):
    """Train on pooled, shuffled map pixels. Returns (weights, epoch mean losses)."""
    if not maps:
        raise SemanticError("need at least one semantic map")
    rows = []
    for m in maps:
        m = np.asarray(m, dtype=np.float32)
        if m.ndim != 3 or m.shape[2] != ENC_DIMS[0]:
            raise SemanticError(f"expected HxWx384 maps, got {m.shape}")
        rows.append(m.reshape(-1, ENC_DIMS[0]))
    data = np.concatenate(rows, axis=0)
    if data.shape[0] < batch_size:
        batch_size = data.shape[0]

    rng = np.random.default_rng(seed)
    weights = random_autoencoder(rng)
    layers = weights.enc + weights.dec
    flat = [a for wb in layers for a in wb]
    opt = Adam(flat, lr=lr)

    history = []
    n = data.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        losses = []
        for s in range(0, n - batch_size + 1, batch_size):
            x = data[order[s : s + batch_size]]
            loss, grads = _ae_step(x, layers, lam_cos)
            if not np.isfinite(loss):
                raise SemanticError(
                    f"non-finite training loss at step {len(losses)} "
                    f"(epoch {len(history)}): {loss}")
            opt.step([a for gw in grads for a in gw])
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return weights, history


def autoencoder_to_tensorfile(weights: AutoencoderWeights, tf=None):
    tf = tf if tf is not None else TensorFile()
    for side, chain in (("enc", weights.enc), ("dec", weights.dec)):
        for i, (w, b) in enumerate(chain):
            tf.add(f"ae.{side}.{i}.weight", w)
            tf.add(f"ae.{side}.{i}.bias", b)
    return tf


def autoencoder_from_tensorfile(tf):
    return AutoencoderWeights(
        enc=[(tf[f"ae.enc.{i}.weight"], tf[f"ae.enc.{i}.bias"]) for i in range(3)],
        dec=[(tf[f"ae.dec.{i}.weight"], tf[f"ae.dec.{i}.bias"]) for i in range(3)],
    )


def distill_scene_features(scene, cameras, encoded_maps, iters=500, lr=2.5e-3,
                           code_dim=16):
    """Fit per-Gaussian codes so rendered features match the encoded maps.

    Mean-L1 objective over every (camera, pixel, channel); unobserved
    Gaussians keep their zero initialization. Returns (scene', history).
    """
    if len(cameras) != len(encoded_maps):
        raise SemanticError(
            f"{len(cameras)} cameras vs {len(encoded_maps)} maps")
    targets = []
    for cam, m in zip(cameras, encoded_maps):
        m = np.asarray(m, dtype=np.float32)
        if m.shape != (cam.height, cam.width, code_dim):
            raise SemanticError(
                f"map shape {m.shape} does not match camera {(cam.height, cam.width, code_dim)}")
        targets.append(m)

    feats = np.zeros((len(scene), code_dim), dtype=np.float32)
    opt = Adam([feats], lr=lr)
    denom = sum(t.size for t in targets)
    history = []
    for _ in range(iters):
        loss, grad = distill_loss_grad(scene, cameras, targets, feats, denom)
        history.append(loss)
        opt.step([grad])
    return scene.copy(features=feats), history


def distill_loss_grad(scene, cameras, targets, feats, denom=None):
    """Mean-L1 loss and its exact gradient w.r.t. feats."""
    if denom is None:
        denom = sum(np.asarray(t).size for t in targets)
    loss = 0.0
    grad = np.zeros_like(feats)
    for cam, target in zip(cameras, targets):
        out, _ = rasterize_features(scene, cam, feats, threads=1)
        resid = out - target
        loss += float(np.abs(resid, dtype=np.float64).sum())
        grad += rasterize_features_grad(scene, cam, np.sign(resid) / denom)
    return loss / denom, grad

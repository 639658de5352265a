"""Pure-numpy compositing kernels (reference semantics).

The compiled extension mirrors every float op here, including the custom
exp approximation, so both backends produce bit-identical images.
"""

import numpy as np

from .project import ALPHA_CLAMP, T_STOP, TILE

NAME = "numpy"

_INV_LN2 = 1.4426950408889634
_LN2 = 0.6931471805599453


def _exp_neg(x32):
    """exp() of a float32 array via ldexp + degree-7 Taylor, float64 inside."""
    xd = x32.astype(np.float64)
    k = np.floor(xd * _INV_LN2 + 0.5)
    k = np.maximum(k, -200.0)
    r = xd - k * _LN2
    p = 1.0 + r * (1.0 + r * (0.5 + r * (1.0 / 6.0 + r * (1.0 / 24.0 + r * (
        1.0 / 120.0 + r * (1.0 / 720.0 + r * (1.0 / 5040.0)))))))
    e = np.ldexp(p, k.astype(np.int32))
    e = np.where(xd < -87.0, 0.0, e)
    return e.astype(np.float32)


def composite(means2d, conics, opacities, feats, tile_offsets, tile_splats,
              tiles_x, tiles_y, height, width, background, n_threads=1):
    C = feats.shape[1]
    out = np.zeros((height, width, C), dtype=np.float32)
    alpha = np.zeros((height, width), dtype=np.float32)
    bg = np.asarray(background, dtype=np.float32)
    t_stop = np.float32(T_STOP)
    clamp = np.float32(ALPHA_CLAMP)
    one = np.float32(1.0)

    for ty in range(tiles_y):
        for tx in range(tiles_x):
            lo = tile_offsets[ty * tiles_x + tx]
            hi = tile_offsets[ty * tiles_x + tx + 1]
            y0, x0 = ty * TILE, tx * TILE
            y1, x1 = min(y0 + TILE, height), min(x0 + TILE, width)
            th, tw = y1 - y0, x1 - x0
            T = np.full((th, tw), one, dtype=np.float32)
            if hi > lo:
                pxf = (np.arange(x0, x1, dtype=np.float32) + np.float32(0.5))[None, :]
                pyf = (np.arange(y0, y1, dtype=np.float32) + np.float32(0.5))[:, None]
                acc = np.zeros((th, tw, C), dtype=np.float32)
                aw = np.zeros((th, tw), dtype=np.float32)
                for s in tile_splats[lo:hi]:
                    active = T >= t_stop
                    if not active.any():
                        break
                    mx, my = means2d[s, 0], means2d[s, 1]
                    a, b, c = conics[s, 0], conics[s, 1], conics[s, 2]
                    b2 = np.float32(2.0) * b
                    dx = pxf - mx
                    dy = pyf - my
                    t0 = dx * dx
                    t1 = dx * dy
                    t2 = dy * dy
                    q = a * t0 + b2 * t1 + c * t2
                    e = _exp_neg(np.float32(-0.5) * q)
                    al = np.minimum(opacities[s] * e, clamp)
                    w = np.where(active, al * T, np.float32(0.0))
                    acc += w[:, :, None] * feats[s]
                    aw += w
                    T = np.where(active, T * (one - al), T)
                out[y0:y1, x0:x1] = acc + T[:, :, None] * bg
                alpha[y0:y1, x0:x1] = np.minimum(aw, one)
            else:
                out[y0:y1, x0:x1] = T[:, :, None] * bg
    return out, alpha


def composite_adjoint(means2d, conics, opacities, residual, tile_offsets,
                      tile_splats, tiles_x, tiles_y, n_splats):
    """Gradient of sum(composite * residual) w.r.t. the per-splat features."""
    height, width, C = residual.shape
    grad = np.zeros((n_splats, residual.shape[2]), dtype=np.float32)
    t_stop = np.float32(T_STOP)
    clamp = np.float32(ALPHA_CLAMP)
    one = np.float32(1.0)

    for ty in range(tiles_y):
        for tx in range(tiles_x):
            lo = tile_offsets[ty * tiles_x + tx]
            hi = tile_offsets[ty * tiles_x + tx + 1]
            if hi <= lo:
                continue
            y0, x0 = ty * TILE, tx * TILE
            y1, x1 = min(y0 + TILE, height), min(x0 + TILE, width)
            th, tw = y1 - y0, x1 - x0
            pxf = (np.arange(x0, x1, dtype=np.float32) + np.float32(0.5))[None, :]
            pyf = (np.arange(y0, y1, dtype=np.float32) + np.float32(0.5))[:, None]
            T = np.full((th, tw), one, dtype=np.float32)
            res = residual[y0:y1, x0:x1]
            for s in tile_splats[lo:hi]:
                active = T >= t_stop
                if not active.any():
                    break
                mx, my = means2d[s, 0], means2d[s, 1]
                a, b, c = conics[s, 0], conics[s, 1], conics[s, 2]
                b2 = np.float32(2.0) * b
                dx = pxf - mx
                dy = pyf - my
                q = a * (dx * dx) + b2 * (dx * dy) + c * (dy * dy)
                e = _exp_neg(np.float32(-0.5) * q)
                al = np.minimum(opacities[s] * e, clamp)
                w = np.where(active, al * T, np.float32(0.0))
                grad[s] += np.einsum("hw,hwc->c", w, res, dtype=np.float64).astype(np.float32)
                T = np.where(active, T * (one - al), T)
    return grad

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tile compositing kernels.

Mirrors _numpy_kernel.py op for op (same float32 arithmetic, same custom
exp) so both backends render bit-identical images. Compiled with
-ffp-contract=off to keep that true. The pixel loops are branchless over
a tile so the compiler can vectorize them.
"""

from concurrent.futures import ThreadPoolExecutor

from libc.stdint cimport int64_t, uint64_t
from libc.string cimport memcpy

import numpy as np

cimport numpy as cnp

cdef extern from *:
    """
    #include <math.h>
    #include <stdint.h>
    #include <string.h>

    /* One splat blended into a tile's pixels. Arithmetic matches the numpy
       fallback exactly: float32 ops, exp via float64 Taylor + 2^k scaling. */
    static void splat_pass(int npx, float mx, float my, float a, float b2, float c,
                           float op, const float* restrict pxb, const float* restrict pyb,
                           float* restrict Tb, float* restrict awb, float* restrict wb,
                           int* any_active)
    {
        int alive = 0;
        for (int j = 0; j < npx; j++) {
            float dx = pxb[j] - mx;
            float dy = pyb[j] - my;
            float q = a * (dx * dx) + b2 * (dx * dy) + c * (dy * dy);
            double xd = (double)(-0.5f * q);
            double y = xd * 1.4426950408889634 + 0.5;
            double tr = (double)(int64_t) y;
            double k = tr - (y < tr ? 1.0 : 0.0);
            k = k < -200.0 ? -200.0 : k;
            double r = xd - k * 0.6931471805599453;
            double p = 1.0 + r * (1.0 + r * (0.5 + r * (1.0 / 6.0 + r * (1.0 / 24.0 + r * (
                1.0 / 120.0 + r * (1.0 / 720.0 + r * (1.0 / 5040.0)))))));
            uint64_t bits = ((uint64_t)((int64_t) k + 1023)) << 52;
            double p2;
            memcpy(&p2, &bits, 8);
            float e = xd < -87.0 ? 0.0f : (float)(p * p2);
            float al = op * e;
            al = al > 0.99f ? 0.99f : al;
            float Tj = Tb[j];
            int act = Tj >= 1e-4f;
            float w = act ? al * Tj : 0.0f;
            wb[j] = w;
            awb[j] += w;
            Tj = act ? Tj * (1.0f - al) : Tj;
            Tb[j] = Tj;
            alive |= (Tj >= 1e-4f);
        }
        *any_active = alive;
    }

    static void accum_pass(int npx, int C, const float* restrict wb,
                           const float* restrict frow, float* restrict acc)
    {
        for (int ci = 0; ci < C; ci++) {
            float f = frow[ci];
            float* accc = acc + (size_t) ci * npx;
            for (int j = 0; j < npx; j++)
                accc[j] += wb[j] * f;
        }
    }
    """
    void splat_pass(int npx, float mx, float my, float a, float b2, float c,
                    float op, const float* pxb, const float* pyb,
                    float* Tb, float* awb, float* wb, int* any_active) nogil
    void accum_pass(int npx, int C, const float* wb, const float* frow, float* acc) nogil

NAME = "ext"

DEF TILE = 16
DEF TPIX = 256  # TILE * TILE

cdef float ALPHA_CLAMP_F = 0.99
cdef float T_STOP_F = 1e-4
cdef float ONE_F = 1.0


cdef inline double _pow2(double k) noexcept nogil:
    # exact 2**k for integer-valued k in [-200, 200] (normal range)
    cdef uint64_t bits = (<uint64_t> (<int64_t> k + 1023)) << 52
    cdef double out
    memcpy(&out, &bits, 8)
    return out


cdef inline float exp_neg(float x) noexcept nogil:
    cdef double xd = <double> x
    cdef double y, tr, k, r, p
    y = xd * 1.4426950408889634 + 0.5
    tr = <double> (<int64_t> y)
    k = tr - (1.0 if y < tr else 0.0)
    k = -200.0 if k < -200.0 else k
    r = xd - k * 0.6931471805599453
    p = 1.0 + r * (1.0 + r * (0.5 + r * (1.0 / 6.0 + r * (1.0 / 24.0 + r * (
        1.0 / 120.0 + r * (1.0 / 720.0 + r * (1.0 / 5040.0)))))))
    return 0.0 if xd < -87.0 else <float> (p * _pow2(k))


cdef void _tile_forward(int t, const float[:, ::1] means2d, const float[:, ::1] conics,
                        const float[::1] opacities, const float[:, ::1] feats,
                        const long long[::1] tile_offsets, const int[::1] tile_splats,
                        int tiles_x, int height, int width, const float[::1] background,
                        float[:, :, ::1] out, float[:, ::1] alpha, float* acc) noexcept nogil:
    cdef int ty = t // tiles_x
    cdef int tx = t % tiles_x
    cdef int y0 = ty * TILE
    cdef int x0 = tx * TILE
    cdef int y1 = y0 + TILE
    cdef int x1 = x0 + TILE
    cdef int C = feats.shape[1]
    cdef long long lo = tile_offsets[t]
    cdef long long hi = tile_offsets[t + 1]
    cdef long long ii
    cdef int j, py, px, ci, s, tw, th, npx, any_active
    cdef float mx, my, a, b2, c, op, dx, dy, q, e, al, w, f, Tj
    cdef float Tbuf[TPIX]
    cdef float awbuf[TPIX]
    cdef float wbuf[TPIX]
    cdef float pxbuf[TPIX]
    cdef float pybuf[TPIX]
    if y1 > height:
        y1 = height
    if x1 > width:
        x1 = width
    th = y1 - y0
    tw = x1 - x0
    npx = th * tw
    j = 0
    for py in range(y0, y1):
        for px in range(x0, x1):
            pxbuf[j] = <float> px + 0.5
            pybuf[j] = <float> py + 0.5
            Tbuf[j] = ONE_F
            awbuf[j] = 0.0
            j = j + 1
    for j in range(npx * C):
        acc[j] = 0.0

    for ii in range(lo, hi):
        s = tile_splats[ii]
        any_active = 0
        splat_pass(npx, means2d[s, 0], means2d[s, 1], conics[s, 0],
                   2.0 * conics[s, 1], conics[s, 2], opacities[s],
                   pxbuf, pybuf, Tbuf, awbuf, wbuf, &any_active)
        accum_pass(npx, C, wbuf, &feats[s, 0], acc)
        if not any_active:
            break

    j = 0
    for py in range(y0, y1):
        for px in range(x0, x1):
            for ci in range(C):
                out[py, px, ci] = acc[ci * npx + j] + Tbuf[j] * background[ci]
            alpha[py, px] = awbuf[j] if awbuf[j] <= ONE_F else ONE_F
            j = j + 1


_POOLS = {}


def _get_pool(nt):
    pool = _POOLS.get(nt)
    if pool is None:
        pool = ThreadPoolExecutor(max_workers=nt)
        _POOLS[nt] = pool
    return pool


def _run_tiles(int t_lo, int t_hi,
               const float[:, ::1] means2d, const float[:, ::1] conics,
               const float[::1] opacities, const float[:, ::1] feats,
               const long long[::1] tile_offsets, const int[::1] tile_splats,
               int tiles_x, int height, int width, const float[::1] background,
               float[:, :, ::1] out, float[:, ::1] alpha, float[::1] scratch):
    cdef int t
    with nogil:
        for t in range(t_lo, t_hi):
            _tile_forward(t, means2d, conics, opacities, feats, tile_offsets,
                          tile_splats, tiles_x, height, width, background,
                          out, alpha, &scratch[0])


def composite(const float[:, ::1] means2d, const float[:, ::1] conics,
              const float[::1] opacities, const float[:, ::1] feats,
              const long long[::1] tile_offsets, const int[::1] tile_splats,
              int tiles_x, int tiles_y, int height, int width,
              const float[::1] background, int n_threads=1):
    cdef int C = feats.shape[1]
    out = np.zeros((height, width, C), dtype=np.float32)
    alpha = np.zeros((height, width), dtype=np.float32)
    cdef int n_tiles = tiles_x * tiles_y
    cdef int nt = n_threads if n_threads > 0 else 1
    if nt > n_tiles and n_tiles > 0:
        nt = n_tiles
    scratch = np.empty((nt, C * TPIX), dtype=np.float32)
    if nt <= 1:
        _run_tiles(0, n_tiles, means2d, conics, opacities, feats, tile_offsets,
                   tile_splats, tiles_x, height, width, background, out, alpha,
                   scratch[0])
        return out, alpha
    chunk = (n_tiles + nt - 1) // nt
    pool = _get_pool(nt)
    futures = [
        pool.submit(_run_tiles, lo, min(lo + chunk, n_tiles), means2d, conics,
                    opacities, feats, tile_offsets, tile_splats, tiles_x, height,
                    width, background, out, alpha, scratch[w])
        for w, lo in enumerate(range(0, n_tiles, chunk))
    ]
    for f in futures:
        f.result()
    return out, alpha


def composite_adjoint(const float[:, ::1] means2d, const float[:, ::1] conics,
                      const float[::1] opacities, const float[:, :, ::1] residual,
                      const long long[::1] tile_offsets, const int[::1] tile_splats,
                      int tiles_x, int tiles_y, int n_splats):
    cdef int height = residual.shape[0]
    cdef int width = residual.shape[1]
    cdef int C = residual.shape[2]
    grad = np.zeros((n_splats, C), dtype=np.float32)
    cdef float[:, ::1] grad_v = grad
    cdef int n_tiles = tiles_x * tiles_y
    cdef int t, ty, tx, y0, x0, y1, x1, py, px, ci, s
    cdef long long lo, hi, ii
    cdef float pxf, pyf, T, dx, dy, a, b2, c, q, e, al, w
    with nogil:
        for t in range(n_tiles):
            lo = tile_offsets[t]
            hi = tile_offsets[t + 1]
            if hi <= lo:
                continue
            ty = t // tiles_x
            tx = t % tiles_x
            y0 = ty * TILE
            x0 = tx * TILE
            y1 = y0 + TILE
            x1 = x0 + TILE
            if y1 > height:
                y1 = height
            if x1 > width:
                x1 = width
            for py in range(y0, y1):
                pyf = <float> py + 0.5
                for px in range(x0, x1):
                    pxf = <float> px + 0.5
                    T = 1.0
                    for ii in range(lo, hi):
                        s = tile_splats[ii]
                        dx = pxf - means2d[s, 0]
                        dy = pyf - means2d[s, 1]
                        a = conics[s, 0]
                        b2 = 2.0 * conics[s, 1]
                        c = conics[s, 2]
                        q = a * (dx * dx) + b2 * (dx * dy) + c * (dy * dy)
                        e = exp_neg(-0.5 * q)
                        al = opacities[s] * e
                        if al > ALPHA_CLAMP_F:
                            al = ALPHA_CLAMP_F
                        w = al * T
                        for ci in range(C):
                            grad_v[s, ci] += w * residual[py, px, ci]
                        T = T * (ONE_F - al)
                        if T < T_STOP_F:
                            break
    return grad

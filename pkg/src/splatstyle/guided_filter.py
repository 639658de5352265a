"""Gray-guide guided filter over box windows (edge-preserving smoothing)."""

import numpy as np


def box_filter(img, radius):
    """Sum over (2r+1)^2 windows clipped at the borders, via cumulative sums."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    r = int(radius)
    out = np.empty_like(img)

    cum = np.cumsum(img, axis=0)
    out[: r + 1] = cum[r : 2 * r + 1]
    out[r + 1 : h - r] = cum[2 * r + 1 :] - cum[: h - 2 * r - 1]
    out[h - r :] = cum[-1:] - cum[h - 2 * r - 1 : h - r - 1]

    cum = np.cumsum(out, axis=1)
    out[:, : r + 1] = cum[:, r : 2 * r + 1]
    out[:, r + 1 : w - r] = cum[:, 2 * r + 1 :] - cum[:, : w - 2 * r - 1]
    out[:, w - r :] = cum[:, -1:] - cum[:, w - 2 * r - 1 : w - r - 1]
    return out


def guided_filter(guide, src, radius, eps):
    """q = mean(a)*gray_guide + mean(b), a = cov(guide,src)/(var(guide)+eps).

    The guide is converted to gray (channel mean); src may have any channel
    count. radius 0 is the identity.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if eps <= 0:
        raise ValueError("eps must be positive")
    guide = np.asarray(guide, dtype=np.float64)
    src = np.asarray(src, dtype=np.float64)
    squeeze = src.ndim == 2
    if squeeze:
        src = src[:, :, None]
    gray = guide.mean(axis=2) if guide.ndim == 3 else guide
    if gray.shape != src.shape[:2]:
        raise ValueError(f"guide {gray.shape} / src {src.shape[:2]} size mismatch")
    if radius == 0:
        out = src.copy()
        return out[:, :, 0] if squeeze else out

    n = box_filter(np.ones_like(gray), radius)
    mean_i = box_filter(gray, radius) / n
    var_i = box_filter(gray * gray, radius) / n - mean_i * mean_i

    out = np.empty_like(src)
    for c in range(src.shape[2]):
        p = src[:, :, c]
        mean_p = box_filter(p, radius) / n
        cov_ip = box_filter(gray * p, radius) / n - mean_i * mean_p
        a = cov_ip / (var_i + eps)
        b = mean_p - a * mean_i
        out[:, :, c] = box_filter(a, radius) / n * gray + box_filter(b, radius) / n
    return out[:, :, 0] if squeeze else out

"""Multi-view consistency: image warping, warp RMSE, and a depth-based
exact-flow oracle standing in for learned optical flow."""

import csv
import io
import json

import numpy as np

from .imageio import FlowField
from .render import rasterize_color, rasterize_depth


class MetricsError(Exception):
    pass


def warp_image(image, flow):
    """Bilinear sample of image at p + flow(p). Returns (warped, in_bounds)."""
    img = np.asarray(image, dtype=np.float64)
    flw = np.asarray(flow, dtype=np.float64)
    if flw.shape[:2] != img.shape[:2] or flw.shape[2:] != (2,):
        raise MetricsError(f"flow {flw.shape} does not match image {img.shape}")
    if not np.all(np.isfinite(flw)):
        raise MetricsError("non-finite flow")
    h, w = img.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    sx = xs + flw[:, :, 0]
    sy = ys + flw[:, :, 1]
    in_bounds = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)

    sxc = np.clip(sx, 0, w - 1)
    syc = np.clip(sy, 0, h - 1)
    x0 = np.floor(sxc).astype(np.int64)
    y0 = np.floor(syc).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sxc - x0)[..., None]
    fy = (syc - y0)[..., None]
    img3 = img if img.ndim == 3 else img[:, :, None]
    top = img3[y0, x0] * (1 - fx) + img3[y0, x1] * fx
    bot = img3[y1, x0] * (1 - fx) + img3[y1, x1] * fx
    warped = top * (1 - fy) + bot * fy
    if img.ndim == 2:
        warped = warped[:, :, 0]
    return warped, in_bounds


def warp_error(image_d, image_dp, flow, mask):
    """RMSE between image_d and image_dp warped into it, over valid pixels."""
    a = np.asarray(image_d, dtype=np.float64)
    if a.shape[:2] != np.asarray(flow).shape[:2]:
        raise MetricsError("image/flow size mismatch")
    mask = np.asarray(mask)
    if not np.all((mask == 0) | (mask == 1)):
        raise MetricsError("mask must be binary")
    warped, in_bounds = warp_image(image_dp, flow)
    valid = (mask > 0.5) & in_bounds
    if not valid.any():
        raise MetricsError("no valid pixels under mask")
    diff = (a - warped)[valid]
    return float(np.sqrt(np.mean(diff * diff)))


def default_depth_tolerance(depths):
    d = depths[np.isfinite(depths) & (depths > 0)]
    if d.size == 0:
        return 1e-3
    span = float(d.max() - d.min())
    return 0.01 * max(span, 0.01 * float(d.mean()))


def gt_flow_from_depth(scene, cam_a, cam_b, depth_tolerance=None, threads=None):
    """Exact flow on cam_b's grid pointing into cam_a, from rendered depth.

    Valid pixels need cam_b alpha >= 0.5, an in-bounds reprojection, and
    agreement with cam_a's rendered depth (the occlusion test).
    """
    depth_b, alpha_b, valid_b = rasterize_depth(scene, cam_b, alpha_threshold=0.5,
                                                threads=threads)
    depth_a, _, valid_a = rasterize_depth(scene, cam_a, alpha_threshold=0.5,
                                          threads=threads)
    if depth_tolerance is None:
        depth_tolerance = default_depth_tolerance(
            np.concatenate([depth_b[valid_b].ravel(), depth_a[valid_a].ravel()]))

    h, w = cam_b.height, cam_b.width
    ys, xs = np.mgrid[0:h, 0:w]
    u = xs + 0.5
    v = ys + 0.5
    z = np.where(valid_b, depth_b, 1.0).astype(np.float64)
    xc = (u - cam_b.cx) / cam_b.fx * z
    yc = (v - cam_b.cy) / cam_b.fy * z
    pts_cam_b = np.stack([xc, yc, z], axis=-1).reshape(-1, 3)
    pts_world = (pts_cam_b - cam_b.t) @ cam_b.R
    pc_a = pts_world @ cam_a.R.T + cam_a.t
    za = pc_a[:, 2].reshape(h, w)
    with np.errstate(divide="ignore", invalid="ignore"):
        qu = (cam_a.fx * pc_a[:, 0].reshape(h, w) / za + cam_a.cx)
        qv = (cam_a.fy * pc_a[:, 1].reshape(h, w) / za + cam_a.cy)

    flow = np.stack([qu - u, qv - v], axis=-1)
    in_bounds = (
        (qu >= 0.5) & (qu <= cam_a.width - 0.5)
        & (qv >= 0.5) & (qv <= cam_a.height - 0.5) & (za > 0)
    )
    # occlusion: the reprojected point must match cam_a's depth there
    col = np.clip(np.round(qu - 0.5).astype(np.int64), 0, cam_a.width - 1)
    row = np.clip(np.round(qv - 0.5).astype(np.int64), 0, cam_a.height - 1)
    depth_at = depth_a[row, col]
    valid_at = valid_a[row, col]
    mask = (
        valid_b & in_bounds & valid_at
        & (np.abs(za - depth_at) <= depth_tolerance)
    )
    flow = np.where(mask[..., None], flow, 0.0)
    return FlowField(flow=flow.astype(np.float32), mask=mask.astype(np.float32))


def evaluate_consistency(scene_original, scene_stylized, trajectory,
                         short_gap=1, long_gap=3, depth_tolerance=None,
                         threads=None):
    """Warp-error table for short/long baseline pairs along a trajectory.

    Flows and masks come from the ORIGINAL scene's geometry; both scenes
    are rendered with the same cameras. Returns a report dict.
    """
    if len(trajectory) < 2:
        raise MetricsError("need >= 2 views")
    renders_o = [rasterize_color(scene_original, cam, threads=threads)
                 for cam in trajectory]
    renders_s = [rasterize_color(scene_stylized, cam, threads=threads)
                 for cam in trajectory]
    rows = []
    for baseline, gap in (("short", short_gap), ("long", long_gap)):
        for i in range(len(trajectory) - gap):
            j = i + gap
            field = gt_flow_from_depth(scene_original, trajectory[i], trajectory[j],
                                       depth_tolerance=depth_tolerance, threads=threads)
            if field.mask.sum() == 0:
                continue
            err_o = warp_error(renders_o[j], renders_o[i], field.flow, field.mask)
            err_s = warp_error(renders_s[j], renders_s[i], field.flow, field.mask)
            rows.append({"pair_index": i, "baseline": baseline,
                         "original_error": err_o, "stylized_error": err_s})
    summary = {}
    for baseline in ("short", "long"):
        sel = [r for r in rows if r["baseline"] == baseline]
        if sel:
            summary[baseline] = {
                "pairs": len(sel),
                "original_error": float(np.mean([r["original_error"] for r in sel])),
                "stylized_error": float(np.mean([r["stylized_error"] for r in sel])),
            }
    return {"rows": rows, "summary": summary}


def report_to_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["pair_index", "baseline", "original_error", "stylized_error"])
    for r in report["rows"]:
        writer.writerow([r["pair_index"], r["baseline"],
                         repr(r["original_error"]), repr(r["stylized_error"])])
    return buf.getvalue()


def report_to_json(report):
    return json.dumps(report["summary"], indent=2, sort_keys=True) + "\n"

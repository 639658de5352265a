"""Pinhole camera model and its JSON schema.

Convention: x_cam = R @ x_world + t, camera looks along +z, pixel (row, col)
samples the point (col + 0.5, row + 0.5) in pixel coordinates.
"""

import json
from dataclasses import dataclass, field

import numpy as np


class CameraError(Exception):
    pass


@dataclass
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    near: float = 0.1
    far: float = 100.0

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if self.fx <= 0 or self.fy <= 0:
            raise CameraError("focal lengths must be positive")
        if not (0 < self.near < self.far):
            raise CameraError(f"need 0 < near < far, got {self.near}, {self.far}")
        if np.abs(self.R @ self.R.T - np.eye(3)).max() > 1e-6:
            raise CameraError("R is not orthonormal")
        if np.linalg.det(self.R) < 0:
            raise CameraError("R is not a proper rotation")

    @property
    def center(self):
        """Camera center in world coordinates."""
        return -self.R.T @ self.t

    def world_to_cam(self, pts):
        return np.asarray(pts, dtype=np.float64) @ self.R.T + self.t

    def to_dict(self):
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
            "R": [float(v) for v in self.R.reshape(-1)],
            "t": [float(v) for v in self.t],
            "near": self.near, "far": self.far,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                fx=float(d["fx"]), fy=float(d["fy"]),
                cx=float(d["cx"]), cy=float(d["cy"]),
                width=int(d["width"]), height=int(d["height"]),
                R=np.asarray(d["R"], dtype=np.float64).reshape(3, 3),
                t=np.asarray(d["t"], dtype=np.float64),
                near=float(d.get("near", 0.1)), far=float(d.get("far", 100.0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise CameraError(f"bad camera dict: {e}") from e


def look_at(eye, target, up=(0.0, 1.0, 0.0), **intrinsics):
    """Camera at eye looking at target; y_cam opposes the up hint."""
    eye = np.asarray(eye, dtype=np.float64)
    z = np.asarray(target, dtype=np.float64) - eye
    nz = np.linalg.norm(z)
    if nz == 0:
        raise CameraError("eye and target coincide")
    z = z / nz
    u = np.asarray(up, dtype=np.float64)
    y = -(u - np.dot(u, z) * z)
    ny = np.linalg.norm(y)
    if ny < 1e-9:
        raise CameraError("up vector is parallel to the view direction")
    y = y / ny
    x = np.cross(y, z)
    R = np.stack([x, y, z])
    return Camera(R=R, t=-R @ eye, **intrinsics)


def save_camera(cam, path):
    with open(path, "w") as f:
        json.dump(cam.to_dict(), f, indent=2)


def load_camera(path):
    with open(path) as f:
        return Camera.from_dict(json.load(f))


def save_trajectory(cams, path):
    with open(path, "w") as f:
        json.dump([c.to_dict() for c in cams], f, indent=2)


def load_trajectory(path):
    with open(path) as f:
        data = json.load(f)
    if not isinstance(data, list):
        raise CameraError("trajectory file must be a JSON array of cameras")
    return [Camera.from_dict(d) for d in data]

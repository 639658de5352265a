"""Reader/writer for 3DGS point clouds in the canonical PLY layout.

The vertex element carries 62 float32 properties in this exact order:
x, y, z, nx, ny, nz, f_dc_0..2, f_rest_0..44, opacity, scale_0..2, rot_0..3.
Files with fewer f_rest properties (lower SH degree) are zero-padded to 45.
"""

from dataclasses import dataclass

import numpy as np

N_F_REST = 45


class PlyError(Exception):
    pass


class PlyFormatError(PlyError):
    """Not a binary_little_endian 1.0 PLY."""


class PlyMissingPropertyError(PlyError):
    """Vertex properties missing or out of canonical order."""


class PlyPropertyTypeError(PlyError):
    """A vertex property is not float32."""


def _canonical_names(n_rest=N_F_REST):
    names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    names += [f"f_rest_{i}" for i in range(n_rest)]
    names += ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
    return names


@dataclass
class RawGaussians:
    """Raw (pre-activation) per-Gaussian attributes, one row per point."""

    positions: np.ndarray     # (P, 3)
    normals: np.ndarray       # (P, 3) placeholder, ignored downstream
    f_dc: np.ndarray          # (P, 3)
    f_rest: np.ndarray        # (P, 45)
    opacity_logit: np.ndarray  # (P,)
    log_scale: np.ndarray     # (P, 3)
    rotation: np.ndarray      # (P, 4) unnormalized quaternion, w first

    def __len__(self):
        return self.positions.shape[0]

    def to_matrix(self):
        return np.hstack(
            [
                self.positions,
                self.normals,
                self.f_dc,
                self.f_rest,
                self.opacity_logit[:, None],
                self.log_scale,
                self.rotation,
            ]
        ).astype(np.float32)

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=np.float32)
        return cls(
            positions=m[:, 0:3],
            normals=m[:, 3:6],
            f_dc=m[:, 6:9],
            f_rest=m[:, 9:54],
            opacity_logit=m[:, 54],
            log_scale=m[:, 55:58],
            rotation=m[:, 58:62],
        )


def read_gaussian_ply(path):
    with open(path, "rb") as f:
        data = f.read()
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply\n") or end < 0:
        raise PlyFormatError("not a PLY file")
    header = data[: end + len(b"end_header\n")]
    body = data[len(header):]

    n_vertex = None
    prop_names = []
    for line in header.decode("ascii", errors="replace").splitlines():
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if parts[1] != "binary_little_endian" or parts[2] != "1.0":
                raise PlyFormatError(f"unsupported format {parts[1]} {parts[2]}")
        elif parts[0] == "element":
            if parts[1] != "vertex":
                raise PlyFormatError(f"unexpected element {parts[1]!r}")
            n_vertex = int(parts[2])
        elif parts[0] == "property":
            if parts[1] != "float":
                raise PlyPropertyTypeError(f"property {parts[2]!r} has type {parts[1]!r}, need float")
            prop_names.append(parts[2])
    if n_vertex is None:
        raise PlyFormatError("missing vertex element")

    # Accept the canonical order with 0..45 f_rest properties, nothing else.
    n_rest = len(prop_names) - (62 - N_F_REST)
    if n_rest < 0 or prop_names != _canonical_names(n_rest):
        expected = _canonical_names()
        for i, name in enumerate(expected[: len(prop_names)]):
            got = prop_names[i] if i < len(prop_names) else None
            if got != name and not (name.startswith("f_rest_") and got == "opacity"):
                raise PlyMissingPropertyError(f"missing property {name!r} at position {i} (got {got!r})")
        raise PlyMissingPropertyError("vertex properties do not match the canonical 3DGS layout")

    n_props = len(prop_names)
    expected_bytes = 4 * n_props * n_vertex
    if len(body) < expected_bytes:
        raise PlyError(f"truncated payload: need {expected_bytes} bytes, have {len(body)}")
    m = np.frombuffer(body[:expected_bytes], dtype="<f4").reshape(n_vertex, n_props)
    if n_rest < N_F_REST:
        full = np.zeros((n_vertex, 62), dtype=np.float32)
        full[:, :9] = m[:, :9]
        full[:, 9 : 9 + n_rest] = m[:, 9 : 9 + n_rest]
        full[:, 54:] = m[:, 9 + n_rest :]
        m = full
    return RawGaussians.from_matrix(m)


def write_gaussian_ply(gaussians, path):
    m = gaussians.to_matrix()
    if m.shape[1] != 62:
        raise PlyError(f"expected 62 attributes per point, got {m.shape[1]}")
    header_lines = ["ply", "format binary_little_endian 1.0", f"element vertex {m.shape[0]}"]
    header_lines += [f"property float {n}" for n in _canonical_names()]
    header_lines.append("end_header")
    header = ("\n".join(header_lines) + "\n").encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(m, dtype="<f4").tobytes())

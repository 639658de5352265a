"""Binary container for named float32 tensors.

Layout (all little-endian):
    magic "FPGS" (4B) | u32 version | u64 tensor count
    per tensor: u32 name length | UTF-8 name | u32 dtype code (0 = f32)
                | u32 rank | rank * u64 dims | row-major f32 payload
"""

import struct
from collections import OrderedDict

import numpy as np

MAGIC = b"FPGS"
VERSION = 1
DTYPE_F32 = 0


class TensorFileError(Exception):
    pass


class BadMagicError(TensorFileError):
    pass


class TruncatedError(TensorFileError):
    pass


class DuplicateNameError(TensorFileError):
    pass


class ShapeMismatchError(TensorFileError):
    pass


class UnsupportedDtypeError(TensorFileError):
    pass


class TensorFile:
    """Ordered mapping of tensor name -> float32 ndarray."""

    def __init__(self, tensors=None):
        self._tensors = OrderedDict()
        if tensors:
            for name, arr in (tensors.items() if isinstance(tensors, dict) else tensors):
                self.add(name, arr)

    def add(self, name, arr):
        if name in self._tensors:
            raise DuplicateNameError(f"duplicate tensor name {name!r}")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if arr.ndim < 1:
            arr = arr.reshape(1)
        self._tensors[name] = arr

    def __getitem__(self, name):
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def get(self, name, default=None):
        return self._tensors.get(name, default)

    def names(self):
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def __len__(self):
        return len(self._tensors)

    def __eq__(self, other):
        if not isinstance(other, TensorFile):
            return NotImplemented
        if self.names() != other.names():
            return False
        return all(
            a.shape == b.shape and np.array_equal(a, b, equal_nan=True)
            for (_, a), (_, b) in zip(self.items(), other.items())
        )


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise TruncatedError(f"truncated file while reading {what}")
    return buf


def read_tensor_file(path):
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != VERSION:
            raise TensorFileError(f"unsupported version {version}")
        (count,) = struct.unpack("<Q", _read_exact(f, 8, "tensor count"))
        tf = TensorFile()
        for k in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(f, 4, f"name length of tensor {k}"))
            name = _read_exact(f, name_len, f"name of tensor {k}").decode("utf-8")
            (dtype_code,) = struct.unpack("<I", _read_exact(f, 4, f"dtype of {name!r}"))
            if dtype_code != DTYPE_F32:
                raise UnsupportedDtypeError(f"tensor {name!r} has dtype code {dtype_code}")
            (rank,) = struct.unpack("<I", _read_exact(f, 4, f"rank of {name!r}"))
            if rank < 1:
                raise ShapeMismatchError(f"tensor {name!r} has rank {rank}, need >= 1")
            dims = struct.unpack(f"<{rank}Q", _read_exact(f, 8 * rank, f"dims of {name!r}"))
            n_elem = 1
            for d in dims:
                n_elem *= d
            payload = _read_exact(f, 4 * n_elem, f"payload of {name!r}")
            arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
            if name in tf:
                raise DuplicateNameError(f"duplicate tensor name {name!r}")
            tf.add(name, arr)
        return tf


def serialize_tensor_file(tf):
    parts = [MAGIC, struct.pack("<IQ", VERSION, len(tf))]
    for name, arr in tf.items():
        if arr.dtype != np.float32:
            raise UnsupportedDtypeError(f"tensor {name!r} has dtype {arr.dtype}")
        nb = name.encode("utf-8")
        parts.append(struct.pack("<I", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<II", DTYPE_F32, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        if len(data) != 4 * arr.size:
            raise ShapeMismatchError(f"tensor {name!r}: shape/data mismatch")
        parts.append(data)
    return b"".join(parts)


def write_tensor_file(tf, path):
    data = serialize_tensor_file(tf)
    with open(path, "wb") as f:
        f.write(data)

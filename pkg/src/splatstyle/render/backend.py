"""Kernel backend selection: compiled extension with pure-numpy fallback.

FPGS_KERNEL=ext|numpy|auto forces a backend (auto prefers the extension).
FPGS_THREADS caps the tile worker count.
"""

import os

from . import _numpy_kernel

try:
    from . import _kernel as _ext_kernel
except ImportError:  # extension not built
    _ext_kernel = None

_FORCED = None


def available_backends():
    names = ["numpy"]
    if _ext_kernel is not None:
        names.insert(0, "ext")
    return names


def set_backend(name):
    """Force a backend ('ext', 'numpy') or None to restore auto selection."""
    global _FORCED
    if name is not None and name not in available_backends():
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    _FORCED = name


def get_backend():
    choice = _FORCED or os.environ.get("FPGS_KERNEL", "auto")
    if choice == "auto":
        return _ext_kernel if _ext_kernel is not None else _numpy_kernel
    if choice == "ext":
        if _ext_kernel is None:
            raise RuntimeError("compiled kernel requested via FPGS_KERNEL=ext but not built")
        return _ext_kernel
    if choice == "numpy":
        return _numpy_kernel
    raise ValueError(f"unknown kernel backend {choice!r}")


def backend_name():
    return get_backend().NAME


def n_threads(override=None):
    if override is not None:
        return max(1, int(override))
    env = os.environ.get("FPGS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1

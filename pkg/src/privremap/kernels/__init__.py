"""Hot Monte-Carlo kernels.

The numba backend is used when numba imports and ``PRIV_REMAP_DISABLE_NUMBA``
is unset or ``0``; otherwise the pure-numpy backend runs. Both consume the
same Philox stream, so they agree sample by sample up to libm rounding.
Each backend is deterministic on its own.
"""

import os
from types import ModuleType

from . import numpy_backend
from ._layout import split_seed

__all__ = ["active", "get_backend", "split_seed", "available_backends"]


def _numba_backend() -> ModuleType | None:
    try:
        from . import numba_backend
    except ImportError:  # numba missing
        return None
    return numba_backend


def available_backends() -> list[str]:
    names = ["numpy"]
    if _numba_backend() is not None:
        names.append("numba")
    return names


def get_backend(name: str | None = None) -> ModuleType:
    """Return the kernel module ``name`` ('numba' or 'numpy'), or the active
    one when ``name`` is None."""
    if name is None:
        return active
    if name == "numpy":
        return numpy_backend
    if name == "numba":
        backend = _numba_backend()
        if backend is None:
            raise RuntimeError("numba backend requested but numba is not importable")
        return backend
    raise ValueError(f"unknown kernel backend {name!r}")


def _select() -> ModuleType:
    if os.environ.get("PRIV_REMAP_DISABLE_NUMBA", "0") not in ("", "0"):
        return numpy_backend
    return _numba_backend() or numpy_backend


active = _select()

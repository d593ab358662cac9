"""Backend selection for the numeric kernels.

Kernels come in two flavours: a numba ``@njit`` version and a pure
numpy/scipy version.  The numba path is used when numba imports cleanly
and ``EDGEQUERY_NO_NUMBA`` is unset (or ``0``).  Tests and benchmarks can
flip the backend at runtime with :func:`set_backend`.
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from typing import Iterator

try:
    from numba import njit as _numba_njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False
    _numba_njit = None


def _env_disabled() -> bool:
    return os.environ.get("EDGEQUERY_NO_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


_backend = "numba" if (HAS_NUMBA and not _env_disabled()) else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when available, else a no-op decorator."""
    if HAS_NUMBA:
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


@contextmanager
def backend(name: str) -> Iterator[None]:
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def use_numba() -> bool:
    return _backend == "numba"

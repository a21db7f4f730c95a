"""Backend selection for the hot kernels.

Kernels come in two flavours: a numba ``@njit`` loop and a vectorised
pure-numpy equivalent. Setting ``SPGAME_PURE_NUMPY=1`` (or running without
numba installed) routes every dispatcher to the numpy path.
"""

from __future__ import annotations

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

ENV_FLAG = "SPGAME_PURE_NUMPY"

HAVE_NUMBA = numba is not None


def _flag_set() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


def default_backend() -> str:
    return "numba" if HAVE_NUMBA and not _flag_set() else "numpy"


def resolve(backend: str | None) -> str:
    if backend is None:
        return default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


def njit(fn=None, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    if numba is None:
        return fn if fn is not None else (lambda f: f)
    kwargs.setdefault("cache", True)
    if fn is None:
        return numba.njit(**kwargs)
    return numba.njit(**kwargs)(fn)

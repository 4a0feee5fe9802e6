"""Backend switch for the compiled inner loops.

Every hot kernel in the package has two implementations: a numba
``@njit`` loop and a vectorised numpy version. The numba path is used
when numba imports cleanly and ``DSSBO_BACKEND`` is not ``numpy``.
"""
from __future__ import annotations

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional speedup
    numba = None

_requested = os.environ.get("DSSBO_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"DSSBO_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

_use_numba = _requested == "numba" and numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or an identity decorator without numba."""
    if numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def use_numba() -> bool:
    return _use_numba


def backend() -> str:
    return "numba" if _use_numba else "numpy"


def set_backend(name: str) -> None:
    """Switch backend at runtime (tests and benchmarks)."""
    global _use_numba
    name = name.lower()
    if name == "numba":
        if numba is None:
            raise RuntimeError("numba is not installed")
        _use_numba = True
    elif name == "numpy":
        _use_numba = False
    else:
        raise ValueError(f"unknown backend {name!r}")

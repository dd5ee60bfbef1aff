"""Numeric backend selection.

Two interchangeable implementations of the low-level array kernels exist:
a pure-numpy one and a numba ``@njit`` one. The active backend is chosen
once at import from the ``GCSE_BACKEND`` environment variable (``numpy``
or ``numba``); default is numba when importable, numpy otherwise. Tests
and the benchmark switch explicitly via :func:`set_backend`.
"""

from __future__ import annotations

import os

from . import _numpy_impl

_BACKENDS = {"numpy": _numpy_impl}

try:
    from . import _numba_impl

    _BACKENDS["numba"] = _numba_impl
    _DEFAULT = "numba"
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba_impl = None
    _DEFAULT = "numpy"

_active_name = os.environ.get("GCSE_BACKEND", _DEFAULT).lower()
if _active_name not in _BACKENDS:
    raise RuntimeError(
        f"GCSE_BACKEND={_active_name!r} not available; choose from {sorted(_BACKENDS)}"
    )
ops = _BACKENDS[_active_name]


def backend_name() -> str:
    return _active_name


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def set_backend(name: str) -> str:
    """Switch the active kernel backend; returns the previous name."""
    global ops, _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(_BACKENDS)}")
    previous = _active_name
    _active_name = name
    ops = _BACKENDS[name]
    return previous

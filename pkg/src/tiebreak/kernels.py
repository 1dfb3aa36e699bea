"""Kernel backend selection.

The compiled extension is preferred; set ``TIEBREAK_PURE_PYTHON=1`` to force
the pure-Python fallback (useful for debugging and for the benchmark).
"""
from __future__ import annotations

import os

from . import _purekernels

BACKENDS = {"python": _purekernels}

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    BACKENDS["cython"] = _compiled

if _compiled is not None and os.environ.get("TIEBREAK_PURE_PYTHON", "") in ("", "0"):
    BACKEND = "cython"
    _impl = _compiled
else:
    BACKEND = "python"
    _impl = _purekernels

pav = _impl.pav
dykstra = _impl.dykstra
dual_project = _impl.dual_project


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    if name is None:
        return _impl
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available; have {sorted(BACKENDS)}") from None

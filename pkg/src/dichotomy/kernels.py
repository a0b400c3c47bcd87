"""Kernel backend selection.

The compiled core is used when it imports; set ``DICHOTOMY_PURE=1`` to force
the pure-Python fallback.
"""
import os

from . import _pykernels

_compiled = None
if os.environ.get("DICHOTOMY_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

_active = _compiled if _compiled is not None else _pykernels


def available_backends():
    out = {"python": _pykernels}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def backend_name():
    return _active.BACKEND


def use_backend(name):
    """Switch the process-wide backend (``"cython"`` or ``"python"``)."""
    global _active
    backends = available_backends()
    if name not in backends:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(backends)}")
    _active = backends[name]


def thomas(lower, diag, upper, f, floor=1e-300):
    return _active.thomas(lower, diag, upper, f, floor)


def pivot_solve(lower, diag, upper, f, floor=1e-300):
    return _active.pivot_solve(lower, diag, upper, f, floor)

"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``PHASELOCK_BACKEND=python`` to force the fallback.
"""
import os

from . import _pykernel

BACKEND = "python"
_impl = _pykernel

if os.environ.get("PHASELOCK_BACKEND", "").lower() != "python":
    try:
        from . import _ckernel as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        pass

integrate = _impl.integrate
forcing_values = _impl.forcing_values

F_NONE = _pykernel.F_NONE
F_TRIG = _pykernel.F_TRIG
F_STEP = _pykernel.F_STEP
F_SPLINE = _pykernel.F_SPLINE


def get_kernel(name):
    """Return the kernel module by name ("cython" or "python")."""
    if name == "python":
        return _pykernel
    if name == "cython":
        from . import _ckernel
        return _ckernel
    raise ValueError(f"unknown backend {name!r}")

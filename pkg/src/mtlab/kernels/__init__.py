"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy backend is
the fallback.  Override with MTLAB_KERNELS=python|cython.  Both backends
implement the same function set with the same quadrature rule; the active
backend name is recorded in run manifests.
"""

import os

from .common import OverflowGuardError, EXP_CAP
from . import py_backend

_choice = os.environ.get("MTLAB_KERNELS", "auto").lower()

if _choice == "python":
    _impl = py_backend
elif _choice == "cython":
    from . import _accel as _impl
else:
    try:
        from . import _accel as _impl
    except ImportError:
        _impl = py_backend

backend_name = _impl.BACKEND

tri_geometry = _impl.tri_geometry
assemble_p1 = _impl.assemble_p1
exp_quad_u2 = _impl.exp_quad_u2
exp_load_u2 = _impl.exp_load_u2
exp_hess_u2 = _impl.exp_hess_u2
exp_quad_fu = _impl.exp_quad_fu
exp_load_fu = _impl.exp_load_fu
exp_mass_fu = _impl.exp_mass_fu

__all__ = [
    "OverflowGuardError",
    "EXP_CAP",
    "backend_name",
    "py_backend",
    "tri_geometry",
    "assemble_p1",
    "exp_quad_u2",
    "exp_load_u2",
    "exp_hess_u2",
    "exp_quad_fu",
    "exp_load_fu",
    "exp_mass_fu",
]

"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``ADAPTSDE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

if os.environ.get("ADAPTSDE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND
normals = _impl.normals
signs = _impl.signs
scaled_error = _impl.scaled_error
linear_scheme_paths = _impl.linear_scheme_paths
philox4x32 = _impl.philox4x32

__all__ = ["BACKEND", "normals", "signs", "scaled_error", "linear_scheme_paths",
           "philox4x32"]

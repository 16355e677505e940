"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy twins.
Set ``SRDISTILL_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

NAME = "python"
resample_axis = _kernels_py.resample_axis
patch_moments = _kernels_py.patch_moments

if not os.environ.get("SRDISTILL_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        NAME = "cython"
        resample_axis = _compiled.resample_axis
        patch_moments = _compiled.patch_moments


def kernels(name: str):
    """Return ``(resample_axis, patch_moments)`` for a named backend."""
    if name == "python":
        return _kernels_py.resample_axis, _kernels_py.patch_moments
    if name == "cython":
        from . import _kernels as compiled

        return compiled.resample_axis, compiled.patch_moments
    raise ValueError(f"unknown backend {name!r}")

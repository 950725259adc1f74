"""Batch kernel backend selection.

The compiled extension is used when present; the numpy module is the
fallback. Set QTMLAB_KERNELS=python or QTMLAB_KERNELS=cython to force one.
"""

import os

from . import pykernels

_requested = os.environ.get("QTMLAB_KERNELS", "auto").lower()

if _requested not in ("auto", "python", "cython"):
    raise ImportError(f"QTMLAB_KERNELS must be auto, python or cython, got {_requested!r}")

_impl = None
if _requested in ("auto", "cython"):
    try:
        from . import _cykernels as _impl
    except ImportError:
        if _requested == "cython":
            raise
        _impl = None
if _impl is None:
    _impl = pykernels

backend_name = _impl.BACKEND

softmax_rows = _impl.softmax_rows
rjk_matrix = _impl.rjk_matrix
rjk_grad = _impl.rjk_grad
choice_values = _impl.choice_values
mean_probs = _impl.mean_probs


def available_backends():
    """List of importable backend modules, numpy one first."""
    found = [pykernels]
    try:
        from . import _cykernels
        found.append(_cykernels)
    except ImportError:
        pass
    return found

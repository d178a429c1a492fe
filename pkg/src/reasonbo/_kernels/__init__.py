"""Hot numeric kernels with an optional compiled fast path.

The Cython extension ``_native`` is used when it was built; setting
``REASONBO_PURE_PYTHON=1`` (or a failed build) selects the NumPy
implementations in ``_numpy``. Both compute identical values and the test
suite cross-checks them whenever the native module is present.
"""

from __future__ import annotations

import os

import numpy as np

from . import _numpy as _numpy_impl

if os.environ.get("REASONBO_PURE_PYTHON"):
    _impl = _numpy_impl
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _numpy_impl

BACKEND = "native" if _impl is not _numpy_impl else "numpy"


def matern52_cross(x1, x2, lengthscales, signal_variance):
    """Matern-5/2 ARD cross-covariance matrix between two point sets."""
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    ls = np.asarray(lengthscales, dtype=float)
    return _impl.matern52_cross(x1, x2, ls, float(signal_variance))


def log_h(z):
    """log(phi(z) + z*Phi(z)), finite for every finite z. Scalar or array."""
    arr = np.asarray(z, dtype=float)
    if np.any(np.isnan(arr)):
        raise ValueError("log_h: NaN input")
    flat = np.ascontiguousarray(arr.reshape(-1))
    out = _impl.log_h_array(flat)
    if arr.ndim == 0:
        return float(out[0])
    return np.asarray(out).reshape(arr.shape)

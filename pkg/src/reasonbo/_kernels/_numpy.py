"""NumPy implementations of the hot kernels.

Reference implementations for the compiled extension in ``_native.pyx``;
the two are interchangeable and cross-checked by the test suite.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfcx as _erfcx
from scipy.special import ndtr as _ndtr

SQRT5 = math.sqrt(5.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
LOG_2PI_HALF = 0.5 * math.log(2.0 * math.pi)          # c1
LOG_PI_OVER_2_HALF = 0.5 * math.log(math.pi / 2.0)    # c2
# piecewise switch for the far-left tail: z <= -1/sqrt(eps)
NEG_INV_SQRT_EPS = -1.0 / math.sqrt(np.finfo(float).eps)


def matern52_cross(x1: np.ndarray, x2: np.ndarray, lengthscales: np.ndarray,
                   signal_variance: float) -> np.ndarray:
    """Matern-5/2 ARD cross-covariance matrix, shape (n1, n2)."""
    a = np.asarray(x1, dtype=float) / lengthscales
    b = np.asarray(x2, dtype=float) / lengthscales
    # squared distances via the expansion, clipped against rounding
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.clip(sq, 0.0, None, out=sq)
    r = np.sqrt(sq)
    s = SQRT5 * r
    return signal_variance * (1.0 + s + (5.0 / 3.0) * sq) * np.exp(-s)


def log_h_array(z: np.ndarray) -> np.ndarray:
    """Piecewise-stable log(phi(z) + z*Phi(z)) over a 1-D array."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)

    near = z > -1.0
    mid = (~near) & (z > NEG_INV_SQRT_EPS)
    far = z <= NEG_INV_SQRT_EPS

    if np.any(near):
        zn = z[near]
        out[near] = np.log(
            INV_SQRT_2PI * np.exp(-0.5 * zn * zn) + zn * _ndtr(zn)
        )
    if np.any(mid):
        zm = z[mid]
        t = -zm  # t >= 1
        inner = np.log(_erfcx(t / math.sqrt(2.0)) * t) + LOG_PI_OVER_2_HALF
        # near the far-tail switch the true inner is ~ -1/t^2, which can round
        # to >= 0; those points take the asymptotic form the far branch uses
        ok = inner < 0.0
        vals = np.empty_like(zm)
        vals[ok] = -0.5 * zm[ok] * zm[ok] - LOG_2PI_HALF + _log1mexp(inner[ok])
        vals[~ok] = -0.5 * zm[~ok] * zm[~ok] - LOG_2PI_HALF - 2.0 * np.log(t[~ok])
        out[mid] = vals
    if np.any(far):
        zf = z[far]
        out[far] = -0.5 * zf * zf - LOG_2PI_HALF - 2.0 * np.log(-zf)
    return out


def _log1mexp(x: np.ndarray) -> np.ndarray:
    """log(1 - exp(x)) for x < 0, stable on both sides of -log(2)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x > -math.log(2.0)
    out[small] = np.log(-np.expm1(x[small]))
    out[~small] = np.log1p(-np.exp(x[~small]))
    return out

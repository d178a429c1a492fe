# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Matern-5/2 ARD cross-covariance and piecewise log_h.

Mirrors ``_numpy.py`` exactly; selected at import by ``reasonbo._kernels``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, expm1, log, log1p, sqrt

from scipy.special.cython_special cimport erfcx as c_erfcx
from scipy.special.cython_special cimport ndtr as c_ndtr

cnp.import_array()

cdef double SQRT5 = sqrt(5.0)
cdef double SQRT2 = sqrt(2.0)
cdef double INV_SQRT_2PI = 0.3989422804014327
cdef double LOG_2PI_HALF = 0.9189385332046727
cdef double LOG_PI_OVER_2_HALF = 0.22579135264472741
cdef double LOG2 = 0.6931471805599453
# -1/sqrt(double eps)
cdef double NEG_INV_SQRT_EPS = -67108864.0


def matern52_cross(object x1, object x2, object lengthscales,
                   double signal_variance):
    """Matern-5/2 ARD cross-covariance matrix, shape (n1, n2)."""
    cdef double[:, ::1] a = np.ascontiguousarray(x1, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(x2, dtype=np.float64)
    cdef double[::1] ls = np.ascontiguousarray(lengthscales, dtype=np.float64)
    cdef Py_ssize_t n1 = a.shape[0], n2 = b.shape[0], d = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n1, n2))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double sq, diff, r, s

    for i in range(n1):
        for j in range(n2):
            sq = 0.0
            for k in range(d):
                diff = (a[i, k] - b[j, k]) / ls[k]
                sq += diff * diff
            r = sqrt(sq)
            s = SQRT5 * r
            o[i, j] = signal_variance * (1.0 + s + (5.0 / 3.0) * sq) * exp(-s)
    return out


cdef inline double _log1mexp(double x) nogil:
    # log(1 - exp(x)) for x < 0
    if x > -LOG2:
        return log(-expm1(x))
    return log1p(-exp(x))


cdef inline double _log_h(double z):
    cdef double t, inner
    if z > -1.0:
        return log(INV_SQRT_2PI * exp(-0.5 * z * z) + z * c_ndtr(z))
    if z > NEG_INV_SQRT_EPS:
        t = -z
        inner = log(c_erfcx(t / SQRT2) * t) + LOG_PI_OVER_2_HALF
        # near the far-tail switch the true inner is ~ -1/t^2, which can
        # round to >= 0; those points take the far branch's asymptotic form
        if inner < 0.0:
            return -0.5 * z * z - LOG_2PI_HALF + _log1mexp(inner)
        return -0.5 * z * z - LOG_2PI_HALF - 2.0 * log(t)
    return -0.5 * z * z - LOG_2PI_HALF - 2.0 * log(-z)


def log_h_array(object z):
    """Piecewise-stable log(phi(z) + z*Phi(z)) over a 1-D array."""
    cdef double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(n):
        o[i] = _log_h(zv[i])
    return out

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tridiagonal kernels.

Same contract as ``_pykernels``; rows are 0-based and ``lower[0]``/``upper[-1]``
are ignored.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

from dichotomy.errors import Singular, ZeroPivot

cnp.import_array()

BACKEND = "cython"


def thomas(const double[::1] lower, const double[::1] diag, const double[::1] upper,
           const double[::1] f, double floor=1e-300):
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double denom
    out = np.empty(n, dtype=np.float64)
    if n == 0:
        return out
    cdef double[::1] x = out
    cdef double[::1] cp = np.empty(n, dtype=np.float64)

    denom = diag[0]
    if fabs(denom) < floor:
        raise ZeroPivot(0, denom)
    cp[0] = upper[0] / denom
    x[0] = f[0] / denom
    for i in range(1, n):
        denom = diag[i] - lower[i] * cp[i - 1]
        if fabs(denom) < floor:
            raise ZeroPivot(i, denom)
        cp[i] = upper[i] / denom
        x[i] = (f[i] - lower[i] * x[i - 1]) / denom
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return out


def pivot_solve(const double[::1] lower, const double[::1] diag, const double[::1] upper,
                const double[::1] f, double floor=1e-300):
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double fact, tmp
    out = np.empty(n, dtype=np.float64)
    if n == 0:
        return out
    cdef double[::1] d = np.array(diag, dtype=np.float64)
    cdef double[::1] du = np.array(upper, dtype=np.float64)
    cdef double[::1] du2 = np.zeros(n, dtype=np.float64)
    cdef double[::1] b = np.array(f, dtype=np.float64)
    cdef double[::1] x = out

    for i in range(n - 1):
        if fabs(d[i]) >= fabs(lower[i + 1]):
            if fabs(d[i]) < floor:
                raise Singular(i, "all pivot candidates vanish")
            fact = lower[i + 1] / d[i]
            d[i + 1] -= fact * du[i]
            b[i + 1] -= fact * b[i]
            du2[i] = 0.0
        else:
            fact = d[i] / lower[i + 1]
            d[i] = lower[i + 1]
            tmp = d[i + 1]
            d[i + 1] = du[i] - fact * tmp
            du[i] = tmp
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            tmp = b[i]
            b[i] = b[i + 1]
            b[i + 1] = tmp - fact * b[i + 1]
    if fabs(d[n - 1]) < floor:
        raise Singular(n - 1, "all pivot candidates vanish")

    x[n - 1] = b[n - 1] / d[n - 1]
    if n > 1:
        x[n - 2] = (b[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (b[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i]
    return out

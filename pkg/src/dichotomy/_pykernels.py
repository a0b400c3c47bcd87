"""Pure-Python tridiagonal kernels (fallback when the compiled core is absent).

Rows are 0-based; ``lower[0]`` and ``upper[-1]`` are ignored.
"""
import numpy as np

from .errors import Singular, ZeroPivot

BACKEND = "python"


def thomas(lower, diag, upper, f, floor=1e-300):
    a = np.asarray(lower, dtype=float).tolist()
    b = np.asarray(diag, dtype=float).tolist()
    c = np.asarray(upper, dtype=float).tolist()
    d = np.asarray(f, dtype=float).tolist()
    n = len(b)
    if n == 0:
        return np.empty(0)
    cp = [0.0] * n
    x = [0.0] * n

    denom = b[0]
    if abs(denom) < floor:
        raise ZeroPivot(0, denom)
    cp[0] = c[0] / denom
    x[0] = d[0] / denom
    for i in range(1, n):
        denom = b[i] - a[i] * cp[i - 1]
        if abs(denom) < floor:
            raise ZeroPivot(i, denom)
        cp[i] = c[i] / denom
        x[i] = (d[i] - a[i] * x[i - 1]) / denom
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return np.array(x)


def pivot_solve(lower, diag, upper, f, floor=1e-300):
    """Banded elimination with row interchange (LAPACK ``gtsv`` scheme)."""
    lo = np.asarray(lower, dtype=float).tolist()
    d = np.asarray(diag, dtype=float).tolist()
    du = np.asarray(upper, dtype=float).tolist()
    b = np.asarray(f, dtype=float).tolist()
    n = len(d)
    if n == 0:
        return np.empty(0)
    du2 = [0.0] * n

    for i in range(n - 1):
        sub = lo[i + 1]
        if abs(d[i]) >= abs(sub):
            if abs(d[i]) < floor:
                raise Singular(i, "all pivot candidates vanish")
            fact = sub / d[i]
            d[i + 1] -= fact * du[i]
            b[i + 1] -= fact * b[i]
        else:
            fact = d[i] / sub
            d[i] = sub
            tmp = d[i + 1]
            d[i + 1] = du[i] - fact * tmp
            du[i] = tmp
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            b[i], b[i + 1] = b[i + 1], b[i] - fact * b[i + 1]
    if abs(d[n - 1]) < floor:
        raise Singular(n - 1, "all pivot candidates vanish")

    x = [0.0] * n
    x[n - 1] = b[n - 1] / d[n - 1]
    if n > 1:
        x[n - 2] = (b[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (b[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i]
    return np.array(x)

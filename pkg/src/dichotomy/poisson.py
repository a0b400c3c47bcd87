"""Dirichlet Helmholtz problem ``Lap u + lam u = f`` on the unit square.

The 5-point scheme is diagonalized along the second grid dimension with an
orthonormal type-I sine transform. Mode ``k`` then leaves the 1-D system
``tridiag{1, (lam - mu_k) h^2 - 2, 1} u_k = h^2 f_k`` along the first
dimension, solved with the dichotomy engine.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .engine import DichotomySolver, SolveOptions
from .errors import NearEigenvalue
from .preliminary import check_near_eigenvalue, helmholtz_matrix


@dataclass
class Grid2D:
    """Interior values of a uniform grid on ``[0, 1]^2``; zero on the boundary."""

    n1: int
    n2: int
    h: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.n1, self.n2)
        for n in (self.n1, self.n2):
            if n < 1 or abs(self.h * (n + 1) - 1.0) > 1e-12:
                raise ValueError(f"mesh width {self.h} inconsistent with {n} interior points")

    @classmethod
    def zeros(cls, n):
        return cls(n, n, 1.0 / (n + 1), np.zeros((n, n)))

    @classmethod
    def from_function(cls, fn, n):
        h = 1.0 / (n + 1)
        x = h * np.arange(1, n + 1)
        X, Y = np.meshgrid(x, x, indexing="ij")
        return cls(n, n, h, fn(X, Y))

    def coords(self):
        x1 = self.h * np.arange(1, self.n1 + 1)
        x2 = self.h * np.arange(1, self.n2 + 1)
        return np.meshgrid(x1, x2, indexing="ij")


# -- sine transform ---------------------------------------------------------

def dst_matrix(n):
    j = np.arange(1, n + 1)
    return math.sqrt(2.0 / (n + 1)) * np.sin(np.pi * np.outer(j, j) / (n + 1))


def dst_direct(v, axis=-1):
    """O(n^2) orthonormal DST-I; its own inverse."""
    v = np.asarray(v, dtype=float)
    S = dst_matrix(v.shape[axis])
    return np.moveaxis(np.tensordot(S, np.moveaxis(v, axis, 0), axes=1), 0, axis)


def dst_fast(v, axis=-1):
    return scipy.fft.dst(np.asarray(v, dtype=float), type=1, norm="ortho", axis=axis)


def dst(v, axis=-1, fast=True):
    return dst_fast(v, axis) if fast else dst_direct(v, axis)


def mode_shift(k, h, n):
    """Eigenvalue magnitude ``(4/h^2) sin^2(k pi h / 2)`` of the k-th sine mode."""
    if not 1 <= k <= n:
        raise ValueError(f"mode {k} outside 1..{n}")
    return 4.0 / (h * h) * math.sin(k * math.pi * h / 2.0) ** 2


# -- solver -------------------------------------------------------------------

def poisson_solve(f, lam, p=1, options=None, preliminary="chebyshev", fast=True):
    """Solve the 5-point Dirichlet problem for right-hand side grid ``f``.

    ``preliminary`` picks how each mode's auxiliary data is built
    (``"chebyshev"``, ``"toeplitz"`` or ``"general"``). Raises
    :class:`NearEigenvalue` if some mode system is numerically singular.
    """
    base = options or SolveOptions()
    opts = SolveOptions(**{**base.__dict__, "preliminary": preliminary})
    n1, n2, h = f.n1, f.n2, f.h
    fhat = dst(f.values, axis=1, fast=fast)
    uhat = np.empty_like(fhat)
    for k in range(1, n2 + 1):
        T = helmholtz_matrix(lam - mode_shift(k, h, n2), h, n1)
        try:
            check_near_eigenvalue(-T.t_zero / 2.0, n1)
        except NearEigenvalue as exc:
            raise NearEigenvalue(k, exc.distance) from exc
        solver = DichotomySolver(T, p, opts)
        uhat[:, k - 1] = solver.solve(h * h * fhat[:, k - 1]).solution
    return Grid2D(n1, n2, h, dst(uhat, axis=1, fast=fast))


def five_point_residual(u, f, lam):
    """Pointwise residual of ``Lap_h u + lam u - f`` (zero Dirichlet data)."""
    U = np.pad(u.values, 1)
    lap = (U[2:, 1:-1] + U[:-2, 1:-1] + U[1:-1, 2:] + U[1:-1, :-2] - 4.0 * U[1:-1, 1:-1]) / u.h ** 2
    return lap + lam * u.values - f.values


def manufactured(n, lam=0.0):
    """``u = sin(pi x) sin(pi y)`` and its right-hand side ``(lam - 2 pi^2) u``."""
    exact = Grid2D.from_function(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), n)
    rhs = Grid2D(n, n, exact.h, (lam - 2.0 * np.pi ** 2) * exact.values)
    return rhs, exact


def convergence_study(hs=(1 / 32, 1 / 64, 1 / 128), lam=0.0, p=1, options=None):
    """Rows ``(h, inf_error, l2_error, order)``; the first order is NaN."""
    rows = []
    prev = None
    for h in hs:
        n = int(round(1.0 / h)) - 1
        rhs, exact = manufactured(n, lam)
        u = poisson_solve(rhs, lam, p, options)
        err = u.values - exact.values
        e_inf = float(np.max(np.abs(err)))
        e_l2 = float(np.sqrt(u.h ** 2 * np.sum(err ** 2)))
        order = math.nan if prev is None else math.log(prev[1] / e_inf) / math.log(prev[0] / u.h)
        rows.append((u.h, e_inf, e_l2, order))
        prev = (u.h, e_inf)
    return rows


# -- I/O ------------------------------------------------------------------

def write_grid(path, grid):
    with open(path, "w") as fh:
        fh.write(f"{grid.n1} {grid.n2} {float(grid.h)!r}\n")
        for v in grid.values.ravel():
            fh.write(f"{float(v)!r}\n")


def read_grid(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError("grid header must be 'n1 n2 h'")
        n1, n2, h = int(header[0]), int(header[1]), float(header[2])
        values = np.loadtxt(fh, ndmin=1)
    if values.size != n1 * n2:
        raise ValueError(f"expected {n1 * n2} values, found {values.size}")
    return Grid2D(n1, n2, h, values)


CONVERGENCE_FIELDS = ("h", "inf_error", "l2_error", "order")


def write_convergence_csv(fh, rows):
    writer = csv.writer(fh)
    writer.writerow(CONVERGENCE_FIELDS)
    for h, e_inf, e_l2, order in rows:
        writer.writerow([repr(float(h)), repr(float(e_inf)), repr(float(e_l2)),
                         "" if math.isnan(order) else repr(float(order))])

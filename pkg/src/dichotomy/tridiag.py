"""Tridiagonal matrix types, sequential solvers and residual checks.

Rows are 0-based internally. ``GeneralTridiagonal`` stores three length-``n``
arrays: ``lower[i] = A[i, i-1]`` (``lower[0] == 0``), ``diag[i] = A[i, i]`` and
``upper[i] = A[i, i+1]`` (``upper[n-1] == 0``).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .errors import Singular, ZeroPivot

PIVOT_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class GeneralTridiagonal:
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.ascontiguousarray(self.lower, dtype=np.float64)
        diag = np.ascontiguousarray(self.diag, dtype=np.float64)
        upper = np.ascontiguousarray(self.upper, dtype=np.float64)
        n = diag.shape[0]
        if diag.ndim != 1 or n < 1:
            raise ValueError("diag must be a non-empty vector")
        if lower.shape != (n,) or upper.shape != (n,):
            raise ValueError("lower, diag and upper must all have length n")
        if lower[0] != 0.0 or upper[-1] != 0.0:
            raise ValueError("lower[0] and upper[n-1] must be exactly zero")
        if not (np.isfinite(lower).all() and np.isfinite(diag).all() and np.isfinite(upper).all()):
            raise ValueError("matrix entries must be finite")
        for name, arr in (("lower", lower), ("diag", diag), ("upper", upper)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self):
        return self.diag.shape[0]

    @classmethod
    def from_bands(cls, sub, diag, sup):
        """Build from LAPACK-style bands (``sub``/``sup`` of length n-1)."""
        diag = np.asarray(diag, dtype=float)
        lower = np.concatenate(([0.0], np.asarray(sub, dtype=float)))
        upper = np.concatenate((np.asarray(sup, dtype=float), [0.0]))
        return cls(lower, diag, upper)

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        y = self.diag * x
        y[1:] += self.lower[1:] * x[:-1]
        y[:-1] += self.upper[:-1] * x[1:]
        return y

    def transpose(self):
        lower = np.zeros(self.n)
        upper = np.zeros(self.n)
        lower[1:] = self.upper[:-1]
        upper[:-1] = self.lower[1:]
        return GeneralTridiagonal(lower, self.diag, upper)

    def block(self, start, stop):
        """Principal sub-matrix on rows/columns ``start..stop-1``."""
        lower = self.lower[start:stop].copy()
        upper = self.upper[start:stop].copy()
        lower[0] = 0.0
        upper[-1] = 0.0
        return GeneralTridiagonal(lower, self.diag[start:stop], upper)

    def to_dense(self):
        A = np.diag(self.diag)
        if self.n > 1:
            A += np.diag(self.lower[1:], -1) + np.diag(self.upper[:-1], 1)
        return A

    def norm_inf(self):
        return float(np.max(np.abs(self.lower) + np.abs(self.diag) + np.abs(self.upper)))

    def fingerprint(self):
        h = hashlib.sha1()
        for arr in (self.lower, self.diag, self.upper):
            h.update(arr.tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class ToeplitzTridiagonal:
    """Constant-diagonal matrix ``tridiag{t_minus, t_zero, t_plus}`` of order n."""

    n: int
    t_minus: float
    t_zero: float
    t_plus: float

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("n must be positive")
        object.__setattr__(self, "n", int(self.n))
        for name in ("t_minus", "t_zero", "t_plus"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    @property
    def symmetric(self):
        return self.t_minus == self.t_plus

    def to_general(self):
        n = self.n
        lower = np.full(n, self.t_minus)
        upper = np.full(n, self.t_plus)
        lower[0] = 0.0
        upper[-1] = 0.0
        return GeneralTridiagonal(lower, np.full(n, self.t_zero), upper)

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        y = self.t_zero * x
        y[1:] += self.t_minus * x[:-1]
        y[:-1] += self.t_plus * x[1:]
        return y

    def block(self, start, stop):
        return ToeplitzTridiagonal(stop - start, self.t_minus, self.t_zero, self.t_plus)

    def norm_inf(self):
        if self.n == 1:
            return abs(self.t_zero)
        return abs(self.t_minus) + abs(self.t_zero) + abs(self.t_plus)

    def fingerprint(self):
        return f"toeplitz:{self.n}:{self.t_minus!r}:{self.t_zero!r}:{self.t_plus!r}"


@dataclass
class SolveReport:
    solution: np.ndarray
    residual_inf: float
    dominant: bool
    warnings: list = field(default_factory=list)
    gamma: float = float("nan")
    bound: float = float("nan")
    levels: int = 0
    t_step1: float = 0.0
    t_step2: float = 0.0
    t_check: float = 0.0
    ops: dict = field(default_factory=dict)

    def summary(self):
        """Flat mapping of the scalar fields, for CSV/JSON rows."""
        return {
            "n": int(self.solution.shape[0]),
            "residual_inf": self.residual_inf,
            "dominant": self.dominant,
            "gamma": self.gamma,
            "bound": self.bound,
            "levels": self.levels,
            "t_step1": self.t_step1,
            "t_step2": self.t_step2,
            "t_check": self.t_check,
            "max_rank_ops": max(self.ops.values()) if self.ops else 0,
            "warnings": ";".join(self.warnings),
        }


def as_general(A):
    if isinstance(A, ToeplitzTridiagonal):
        return A.to_general()
    return A


def _check_rhs(A, f):
    f = np.ascontiguousarray(f, dtype=np.float64)
    if f.shape != (A.n,):
        raise ValueError(f"right-hand side has shape {f.shape}, expected ({A.n},)")
    return f


def thomas_solve(A, f, floor=PIVOT_FLOOR):
    """Solve ``A x = f`` by forward elimination and back substitution.

    No pivoting is done. Raises ``ZeroPivot`` when a pivot magnitude drops
    below ``floor``; callers then fall back to :func:`nonmonotonic_solve` or
    :func:`dense_solve_oracle`.
    """
    A = as_general(A)
    f = _check_rhs(A, f)
    return kernels.thomas(A.lower, A.diag, A.upper, f, floor)


def nonmonotonic_solve(A, f, floor=PIVOT_FLOOR):
    """Elimination with row interchanges restricted to the band.

    Stable without diagonal dominance; raises ``Singular`` if both pivot
    candidates of a column vanish.
    """
    A = as_general(A)
    f = _check_rhs(A, f)
    return kernels.pivot_solve(A.lower, A.diag, A.upper, f, floor)


def local_solve(A, f, dominant=None):
    """Thomas on dominant matrices, pivoted elimination otherwise."""
    if dominant is None:
        dominant = is_diagonally_dominant(A)
    if dominant:
        try:
            return thomas_solve(A, f)
        except ZeroPivot:
            pass
    return nonmonotonic_solve(A, f)


def refined_solve(A, f, dominant=None, steps=1):
    """:func:`local_solve` plus iterative refinement with an extended-precision residual.

    The correction removes the condition-number factor from the forward error
    as long as ``cond(A) * eps < 1``.
    """
    A = as_general(A)
    f = _check_rhs(A, f)
    x = local_solve(A, f, dominant)
    lo, d, up = (arr.astype(np.longdouble) for arr in (A.lower, A.diag, A.upper))
    fl = f.astype(np.longdouble)
    for _ in range(steps):
        xl = x.astype(np.longdouble)
        r = fl - d * xl
        r[1:] -= lo[1:] * xl[:-1]
        r[:-1] -= up[:-1] * xl[1:]
        x = x + local_solve(A, r.astype(np.float64), dominant)
    return x


def dense_solve_oracle(A, f):
    """Reference solution from LAPACK banded LU with partial pivoting."""
    A = as_general(A)
    f = _check_rhs(A, f)
    n = A.n
    if n > 16384:
        raise ValueError("oracle limited to n <= 16384")
    ab = np.zeros((3, n))
    ab[0, 1:] = A.upper[:-1]
    ab[1] = A.diag
    ab[2, :-1] = A.lower[1:]
    try:
        x = scipy.linalg.solve_banded((1, 1), ab, f, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise Singular(detail=str(exc)) from exc
    if not np.isfinite(x).all():
        raise Singular(detail="non-finite oracle solution")
    return x


def residual_inf(A, x, f):
    return float(np.max(np.abs(A.matvec(x) - np.asarray(f, dtype=float))))


def residual_scale(A, x, f):
    """Scale ``||A|| ||x|| + ||f||`` used to normalize residuals."""
    return A.norm_inf() * float(np.max(np.abs(x))) + float(np.max(np.abs(f)))


def is_diagonally_dominant(A):
    """Row dominance with at least one strict inequality."""
    if isinstance(A, ToeplitzTridiagonal):
        if A.n == 1:
            return A.t_zero != 0.0
        b = abs(A.t_zero)
        edge = (b >= abs(A.t_plus), b >= abs(A.t_minus))
        strict = b > abs(A.t_plus) or b > abs(A.t_minus)
        if A.n > 2:
            off = abs(A.t_minus) + abs(A.t_plus)
            return b >= off and all(edge) and (strict or b > off)
        return all(edge) and strict
    off = np.abs(A.lower) + np.abs(A.upper)
    b = np.abs(A.diag)
    return bool(np.all(b >= off) and np.any(b > off))


def random_dominant(n, rng, margin=0.5, symmetric=False):
    """Random strictly diagonally dominant matrix (test and bench helper)."""
    lower = rng.uniform(-1.0, 1.0, n)
    upper = lower[1:].copy() if symmetric else rng.uniform(-1.0, 1.0, n - 1)
    upper = np.concatenate((upper, [0.0]))
    lower[0] = 0.0
    sign = rng.choice([-1.0, 1.0], n)
    diag = sign * (np.abs(lower) + np.abs(upper) + margin + rng.uniform(0.0, 1.0, n))
    return GeneralTridiagonal(lower, diag, upper)

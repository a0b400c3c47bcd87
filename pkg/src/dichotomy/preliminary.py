"""Per-rank auxiliary data: Green's segments, exterior-vector values, ratios.

Index conventions: global rows are 0-based; rank ``m`` owns rows
``first_index[m] .. last_index[m]`` inclusive. Formulas in comments use
1-based ``mL = first + 1`` and ``mR = last + 1``.

Three construction paths produce identical :class:`AuxVectors`:

* :func:`prelim_general` - O(N) per rank, any nonsingular tridiagonal matrix.
* :func:`prelim_toeplitz_q` - closed-form inverse entries from the roots of
  ``t1 q^2 + t0 q + t_{-1} = 0``; O(block + log p).
* :func:`prelim_helmholtz_cheb` / :func:`prelim_toeplitz_cheb` - symmetric
  Toeplitz matrices through Chebyshev polynomials; O(block + log p).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import chebyshev as cheb
from .errors import (
    DegenerateRoots,
    DomainError,
    NearEigenvalue,
    NoSolution,
    NonFiniteRatio,
    Singular,
    TooManyRanks,
)
from .tridiag import (
    ToeplitzTridiagonal,
    is_diagonally_dominant,
    local_solve,
    refined_solve,
)

ROOT_SEPARATION = 1e-8
EIGEN_TOL = 1e-12


@dataclass(frozen=True)
class BlockLayout:
    p: int
    sizes: tuple
    first_index: tuple
    last_index: tuple

    @property
    def n(self):
        return self.last_index[-1] + 1

    def block(self, m):
        return self.first_index[m], self.last_index[m]

    def owner(self, index):
        return int(np.searchsorted(self.last_index, index))


def build_layout(N, p):
    """Balanced contiguous partition; the first ``N mod p`` blocks get one extra row."""
    if p < 1:
        raise TooManyRanks(f"need p >= 1, got {p}")
    if N < 2 * p:
        raise TooManyRanks(f"N={N} < 2p={2 * p}: every block needs at least two rows")
    base, extra = divmod(N, p)
    sizes = tuple(base + 1 if i < extra else base for i in range(p))
    first = tuple(int(v) for v in np.concatenate(([0], np.cumsum(sizes)[:-1])))
    last = tuple(f + s - 1 for f, s in zip(first, sizes))
    return BlockLayout(p, sizes, first, last)


@dataclass(frozen=True)
class Level:
    level: int
    lo: int
    hi: int
    root: int


def middle(lo, hi):
    return (lo + hi) // 2


def dichotomy_path(p, m):
    """Groups rank ``m`` belongs to, level by level, ending where it is the root."""
    lo, hi, s = 0, p - 1, 1
    path = []
    while True:
        r = middle(lo, hi)
        path.append(Level(s, lo, hi, r))
        if m == r:
            return path
        if m < r:
            hi = r - 1
        else:
            lo = r + 1
        s += 1


def dichotomy_depth(p):
    return max(len(dichotomy_path(p, m)) for m in range(p))


def communication_levels(p):
    """Levels that involve at least one reduction (groups of two or more ranks)."""
    return max(sum(1 for lv in dichotomy_path(p, m) if lv.hi > lv.lo) for m in range(p))


def needed_z_indices(layout, m):
    """Global indices at which rank ``m`` must know its exterior vectors."""
    s, e = layout.block(m)
    z_left, z_right = {s}, {e}
    for lv in dichotomy_path(layout.p, m):
        if m < lv.root:
            z_right.add(layout.first_index[lv.root])
        elif m > lv.root:
            z_left.add(layout.last_index[lv.root])
    if s > 0:
        z_left.add(s - 1)
    if e < layout.n - 1:
        z_right.add(e + 1)
    return sorted(z_left), sorted(z_right)


@dataclass
class AuxVectors:
    rank: int
    first: int
    last: int
    zL_at: dict
    zR_at: dict
    gL: np.ndarray
    gR: np.ndarray
    ratio_first: float = field(init=False)
    ratio_last: float = field(init=False)

    def __post_init__(self):
        self.gL = np.ascontiguousarray(self.gL, dtype=float)
        self.gR = np.ascontiguousarray(self.gR, dtype=float)
        if not (np.isfinite(self.gL).all() and np.isfinite(self.gR).all()):
            raise NonFiniteRatio(f"rank {self.rank}: non-finite Green's values")
        with np.errstate(divide="ignore", invalid="ignore"):
            self.ratio_first = float(self.gL[-1] / self.gR[-1])
            self.ratio_last = float(self.gR[0] / self.gL[0])
        if not (math.isfinite(self.ratio_first) and math.isfinite(self.ratio_last)):
            raise NonFiniteRatio(f"rank {self.rank}: boundary ratio not finite")

    def z_left(self, index):
        return self.zL_at.get(index, 0.0) if index >= 0 else 0.0

    def z_right(self, index):
        return self.zR_at.get(index, 0.0)

    def max_abs_z(self):
        vals = [abs(v) for k, v in self.zL_at.items() if k != self.first]
        vals += [abs(v) for k, v in self.zR_at.items() if k != self.last]
        return max(vals, default=0.0)

    def max_rel_diff(self, other):
        """Largest normwise relative difference over all fields."""
        def rel(a, b):
            a = np.asarray(a, dtype=float)
            b = np.asarray(b, dtype=float)
            scale = max(float(np.max(np.abs(b))), 1e-300)
            return float(np.max(np.abs(a - b))) / scale

        if set(self.zL_at) != set(other.zL_at) or set(self.zR_at) != set(other.zR_at):
            raise ValueError("auxiliary vectors cover different index sets")
        keys_l = sorted(self.zL_at)
        keys_r = sorted(self.zR_at)
        return max(
            rel(self.gL, other.gL),
            rel(self.gR, other.gR),
            rel([self.zL_at[k] for k in keys_l], [other.zL_at[k] for k in keys_l]),
            rel([self.zR_at[k] for k in keys_r], [other.zR_at[k] for k in keys_r]),
            rel([self.ratio_first, self.ratio_last], [other.ratio_first, other.ratio_last]),
        )


def _check_layout(n, layout):
    if layout.n != n:
        raise ValueError(f"layout covers {layout.n} rows, matrix has {n}")


# -- general path ------------------------------------------------------------

def prelim_general(A, layout, rank, dominant=None):
    """Green's rows by full transposed solves, exterior vectors by sub-block solves.

    Without diagonal dominance each solve is refined once against an
    extended-precision residual, which keeps this path accurate on
    ill-conditioned indefinite matrices.
    """
    if isinstance(A, ToeplitzTridiagonal):
        A = A.to_general()
    n = A.n
    _check_layout(n, layout)
    s, e = layout.block(rank)
    if dominant is None:
        dominant = is_diagonally_dominant(A)
    AT = A.transpose()
    solve = local_solve if dominant else refined_solve

    unit = np.zeros(n)
    unit[s] = 1.0
    gL = solve(AT, unit, dominant)[s:e + 1]
    unit[s] = 0.0
    unit[e] = 1.0
    gR = solve(AT, unit, dominant)[s:e + 1]

    left_idx, right_idx = needed_z_indices(layout, rank)
    zL_at = {s: 1.0}
    if s > 0:
        sub = A.block(0, s)
        rhs = np.zeros(s)
        rhs[-1] = -A.upper[s - 1]
        zl = solve(sub, rhs)
        zL_at.update({k: float(zl[k]) for k in left_idx if k < s})
    zR_at = {e: 1.0}
    if e < n - 1:
        sub = A.block(e + 1, n)
        rhs = np.zeros(n - e - 1)
        rhs[0] = -A.lower[e + 1]
        zr = solve(sub, rhs)
        zR_at.update({k: float(zr[k - e - 1]) for k in right_idx if k > e})
    return AuxVectors(rank, s, e, zL_at, zR_at, gL, gR)


# -- Toeplitz path through the characteristic roots --------------------------

@dataclass(frozen=True)
class _Roots:
    q1: complex
    q2: complex  # |q2| >= |q1|
    t1: float

    @property
    def r(self):
        return self.q1 / self.q2

    def w(self, a):
        """(1 - r^a) / (1 - r) = S_a / q2^(a-1) with S_a = (q2^a - q1^a)/(q2 - q1)."""
        r = self.r
        a = np.asarray(a)
        return (1.0 - np.power(r, a)) / (1.0 - r)


def toeplitz_roots(T):
    if T.t_plus == 0.0:
        raise DomainError("closed form divides by the super-diagonal t_plus")
    disc = cmath.sqrt(complex(T.t_zero * T.t_zero - 4.0 * T.t_minus * T.t_plus))
    q1 = (-T.t_zero + disc) / (2.0 * T.t_plus)
    q2 = (-T.t_zero - disc) / (2.0 * T.t_plus)
    if abs(q1 - q2) < ROOT_SEPARATION * (abs(q1) + abs(q2)):
        raise DegenerateRoots(f"q1={q1}, q2={q2} too close for the closed form")
    if q2 == 0.0 or q1 == 0.0:
        raise DegenerateRoots("zero characteristic root (t_minus == 0)")
    if abs(q1) > abs(q2):
        q1, q2 = q2, q1
    return _Roots(q1, q2, T.t_plus)


def toeplitz_inverse_entry(T, row, col):
    """``(T^{-1})[row, col]`` (0-based) in O(1) from the characteristic roots."""
    rt = toeplitz_roots(T)
    n1, k1, N = row + 1, col + 1, T.n
    wN = rt.w(N + 1)
    if k1 >= n1:
        val = -np.power(rt.q2, n1 - k1 - 1) * rt.w(N + 1 - k1) * rt.w(n1) / (wN * rt.t1)
    else:
        val = -np.power(rt.q1, n1 - k1) / rt.q2 * rt.w(N + 1 - n1) * rt.w(k1) / (wN * rt.t1)
    return float(np.real(val))


def prelim_toeplitz_q(T, layout, rank):
    """Auxiliary data from closed-form inverse entries of a Toeplitz matrix.

    With ``S_a = (q2^a - q1^a)/(q2 - q1)`` the inverse is
    ``-S_{N+1-k} S_n / (S_{N+1} t1)`` for ``k >= n`` and
    ``-(q1 q2)^{n-k} S_{N+1-n} S_k / (S_{N+1} t1)`` for ``k < n``. Every power
    is rewritten against the larger root so no intermediate overflows.
    """
    N = T.n
    _check_layout(N, layout)
    rt = toeplitz_roots(T)
    if abs(1.0 - rt.r ** (N + 1)) < 1e-13:
        raise NoSolution("q1^(N+1) == q2^(N+1): matrix is singular")
    s, e = layout.block(rank)
    mL, mR = s + 1, e + 1
    q1, q2, t1 = rt.q1, rt.q2, rt.t1
    wN = rt.w(N + 1)

    j1 = np.arange(mL, mR + 1)
    gL = -np.power(q2, mL - j1 - 1.0) * rt.w(N + 1 - j1) * rt.w(mL) / (wN * t1)
    gR = -np.power(q1, (mR - j1).astype(float)) / q2 * rt.w(N + 1 - mR) * rt.w(j1) / (wN * t1)

    left_idx, right_idx = needed_z_indices(layout, rank)
    zL_at, zR_at = {s: 1.0}, {e: 1.0}
    if s > 0:
        w_den = rt.w(mL)
        if abs(w_den) < 1e-13:
            raise Singular((0, s - 1), "left exterior block singular")
        for k in left_idx:
            if k < s:
                k1 = k + 1
                zL_at[k] = float(np.real(np.power(q2, k1 - mL) * rt.w(k1) / w_den))
    if e < N - 1:
        M = N - mR
        w_den = rt.w(M + 1)
        if abs(w_den) < 1e-13:
            raise Singular((e + 1, N - 1), "right exterior block singular")
        for k in right_idx:
            if k > e:
                i = k + 1 - mR
                zR_at[k] = float(np.real(np.power(q1, i) * rt.w(M + 1 - i) / w_den))
    return AuxVectors(rank, s, e, zL_at, zR_at, np.real(gL), np.real(gR))


# -- symmetric Toeplitz through Chebyshev polynomials -----------------------

def check_near_eigenvalue(x, n, tol=EIGEN_TOL):
    """Raise ``NearEigenvalue`` if ``x`` is within ``tol`` of ``cos(k pi/(n+1))``."""
    if abs(x) >= 1.0:
        return
    ng = n + 1
    theta = math.acos(x)
    k0 = int(round(theta * ng / math.pi))
    for k in (k0 - 1, k0, k0 + 1):
        if 1 <= k <= n:
            dist = abs(x - math.cos(k * math.pi / ng))
            if dist < tol:
                raise NearEigenvalue(k, dist)


def _sinh_ratio(num, den, a):
    # sinh(num*a) / sinh(den*a) for num <= den, a > 0, never forming large values
    if num == 0:
        return 0.0
    return math.exp((num - den) * a) * math.expm1(-2.0 * num * a) / math.expm1(-2.0 * den * a)


def green_endpoints_overflow_safe(x, n, mL, mR, i):
    """Green's row values ``(gL_i, gR_i)`` of ``tridiag{1, -2x, 1}`` for ``|x| > 1``.

    ``n`` is the number of unknowns (the grid has ``n + 1`` intervals); indices
    are 1-based with ``mL <= i <= mR``. With ``eta = e^a``, ``Ng = n + 1``,
    ``gL_i = -[eta^(mL-i) - eta^(mL+i-2Ng) - eta^(-mL-i) + eta^(i-mL-2Ng)]
    / ((eta - 1/eta)(1 - eta^(-2Ng)))`` and the mirror expression for ``gR_i``.
    Each bracket is evaluated in factored form; every exponent is <= 0.
    """
    if abs(x) <= 1.0:
        raise DomainError(f"overflow-safe form needs |x| > 1 (x={x})")
    if not (1 <= mL <= i <= mR <= n):
        raise ValueError("need 1 <= mL <= i <= mR <= n")
    a = math.acosh(abs(x))
    ng = n + 1
    d = 2.0 * math.sinh(a)
    den = d * -math.expm1(-2.0 * ng * a)
    gl = (math.exp((mL - i) * a) * -math.expm1(-2.0 * mL * a)
          * -math.expm1(-2.0 * (ng - i) * a) / den)
    gr = (math.exp((i - mR) * a) * -math.expm1(-2.0 * i * a)
          * -math.expm1(-2.0 * (ng - mR) * a) / den)
    if x < 0:
        gl *= -1.0 if (mL - 1 - i) % 2 else 1.0
        gr *= -1.0 if (i - 1 - mR) % 2 else 1.0
    return -gl, -gr


class _ChebUnit:
    """Values of U_k(x) ratios for ``tridiag{1, -2x, 1}`` of order n."""

    def __init__(self, x, n):
        self.x = x
        self.n = n
        self.outside = abs(x) > 1.0
        # ratios of sinh values keep exponents small; direct U_n evaluation would lose
        # about n*acosh|x| ulps and overflows past N_0
        self.safe = self.outside
        if self.outside:
            self.a = math.acosh(abs(x))

    def u(self, k):
        return cheb.u_eval(k, self.x)

    def ratio(self, k_num, k_den):
        """U_{k_num}(x) / U_{k_den}(x) with ``k_num <= k_den``."""
        if self.safe:
            sign = -1.0 if (self.x < 0 and (k_num - k_den) % 2) else 1.0
            return sign * _sinh_ratio(k_num + 1, k_den + 1, self.a)
        den = self.u(k_den)
        if den == 0.0:
            raise Singular(detail=f"U_{k_den}({self.x}) vanishes")
        return self.u(k_num) / den

    def green(self, mL, mR, i):
        n = self.n
        if self.safe:
            return green_endpoints_overflow_safe(self.x, n, mL, mR, i)
        un = self.u(n)
        if un == 0.0:
            raise NearEigenvalue(0, 0.0)
        gl = -self.u(mL - 1) * (self.u(n - i) / un)
        gr = -self.u(i - 1) * (self.u(n - mR) / un)
        return gl, gr


def _prelim_cheb(x, scale, n, layout, rank):
    """Auxiliary data for ``scale * tridiag{1, -2x, 1}`` of order n."""
    _check_layout(n, layout)
    check_near_eigenvalue(x, n)
    cu = _ChebUnit(x, n)
    s, e = layout.block(rank)
    mL, mR = s + 1, e + 1
    b = e - s + 1

    gl_first, gr_first = cu.green(mL, mR, mL)
    gl_last, gr_last = cu.green(mL, mR, mR)
    gL = np.empty(b)
    gR = np.empty(b)
    gL[0], gL[-1] = gl_first, gl_last
    gR[0], gR[-1] = gr_first, gr_last
    if b > 2:
        inner = ToeplitzTridiagonal(b - 2, 1.0, -2.0 * x, 1.0)
        dominant = abs(x) >= 1.0
        for g in (gL, gR):
            rhs = np.zeros(b - 2)
            rhs[0] -= g[0]
            rhs[-1] -= g[-1]
            g[1:-1] = local_solve(inner, rhs, dominant)
    gL /= scale
    gR /= scale

    left_idx, right_idx = needed_z_indices(layout, rank)
    zL_at, zR_at = {s: 1.0}, {e: 1.0}
    for k in left_idx:
        if k < s:
            # Z^L_k = U_{k-1} / U_{mL-1} (1-based k)
            zL_at[k] = cu.ratio(k, mL - 1)
    for k in right_idx:
        if k > e:
            # Z^R_k = U_{n-k} / U_{n-mR} (1-based k)
            zR_at[k] = cu.ratio(n - (k + 1), n - mR)
    return AuxVectors(rank, s, e, zL_at, zR_at, gL, gR)


def helmholtz_matrix(lam, h, n):
    """``tridiag{1, lam h^2 - 2, 1}``: the mode system scaled by h^2."""
    return ToeplitzTridiagonal(n, 1.0, lam * h * h - 2.0, 1.0)


def prelim_helmholtz_cheb(lam, h, n, layout, rank):
    """Auxiliary data for ``tridiag{1, lam h^2 - 2, 1}`` via Chebyshev polynomials.

    ``x = 1 - h^2 lam / 2`` is taken as ``-t0/2`` of the rounded diagonal so the
    result belongs to exactly the matrix the general path sees.
    """
    T = helmholtz_matrix(lam, h, n)
    return _prelim_cheb(-T.t_zero / 2.0, 1.0, n, layout, rank)


def prelim_toeplitz_cheb(T, layout, rank):
    """Symmetric Toeplitz ``t1 * tridiag{1, t0/t1, 1}`` through the Chebyshev path."""
    if not T.symmetric or T.t_plus == 0.0:
        raise DomainError("Chebyshev path needs t_minus == t_plus != 0")
    return _prelim_cheb(-T.t_zero / (2.0 * T.t_plus), T.t_plus, T.n, layout, rank)


# -- dispatch ---------------------------------------------------------------

METHODS = ("general", "toeplitz", "chebyshev")


def choose_method(A):
    if isinstance(A, ToeplitzTridiagonal) and A.n > 1:
        if A.symmetric and A.t_plus != 0.0:
            return "chebyshev"
        try:
            toeplitz_roots(A)
        except (DegenerateRoots, DomainError):
            return "general"
        return "toeplitz"
    return "general"


def build_aux(A, layout, method="auto"):
    """AuxVectors for every rank; returns ``(aux_list, method_used)``."""
    if method == "auto":
        method = choose_method(A)
    if method == "general":
        dominant = is_diagonally_dominant(A)
        general = A.to_general() if isinstance(A, ToeplitzTridiagonal) else A
        return [prelim_general(general, layout, m, dominant) for m in range(layout.p)], method
    if not isinstance(A, ToeplitzTridiagonal):
        raise DomainError(f"method {method!r} needs a Toeplitz matrix")
    if method == "toeplitz":
        return [prelim_toeplitz_q(A, layout, m) for m in range(layout.p)], method
    if method == "chebyshev":
        return [prelim_toeplitz_cheb(A, layout, m) for m in range(layout.p)], method
    raise ValueError(f"unknown preliminary method {method!r}")

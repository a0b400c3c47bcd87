"""Parallel dichotomy solver running on the in-process fabric.

Every rank owns a contiguous block of rows. It first forms two dot products
of its right-hand side with its Green's row segments (``beta_L``, ``beta_R``).
Then, level by level, the middle rank of each active group collects the
influence of its neighbours through two rooted sum reductions, solves for
its two boundary unknowns and passes corrections to the adjacent ranks, after
which the group splits in two. Finally every rank recovers its interior
unknowns with an independent local solve.
"""
from __future__ import annotations

import math
import os
import time
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import fabric as fab
from .errors import GammaGuardWarning, NonFiniteRatio
from .preliminary import BlockLayout, build_aux, build_layout, communication_levels, dichotomy_path
from .tridiag import (
    SolveReport,
    ToeplitzTridiagonal,
    is_diagonally_dominant,
    local_solve,
    residual_inf,
    residual_scale,
)

EPS = float(np.finfo(float).eps)
CACHE_SIZE = 32

# analytic flop costs of the kernels, per row where applicable
THOMAS_FLOPS = 8
PIVOT_FLOPS = 10


@dataclass
class SolveOptions:
    """Run-time knobs of :func:`dichotomy_solve`.

    ``gamma_cap`` bounds the largest exterior-vector magnitude accepted without
    a warning; ``accuracy_budget`` bounds ``gamma**levels * eps``. When either
    is exceeded a :class:`GammaGuardWarning` is issued. A residual check runs
    when ``posterior_check`` is set or whenever ``gamma > 1``.
    """

    gamma_cap: float = 3.0
    mode: str = "deterministic"
    posterior_check: bool = True
    accuracy_budget: float = 1e-8
    residual_tol: float = 1e-10
    tree: str = "chain"
    preliminary: str = "auto"
    timeout: float = 10.0
    trace: bool = False

    def __post_init__(self):
        if not self.gamma_cap >= 1.0:
            raise ValueError(f"gamma_cap must be >= 1, got {self.gamma_cap}")
        if self.mode not in fab.MODES:
            raise ValueError(f"mode must be one of {fab.MODES}, got {self.mode!r}")
        if self.tree not in fab.TREES:
            raise ValueError(f"tree must be one of {fab.TREES}, got {self.tree!r}")

    @classmethod
    def from_env(cls, **kw):
        """Options with ``DICHOTOMY_MODE`` taking precedence over ``mode``."""
        env = os.environ.get("DICHOTOMY_MODE")
        if env:
            kw["mode"] = env.strip().lower()
        return cls(**kw)


@dataclass
class RankState:
    rank: int
    block_f: np.ndarray
    beta_L: float = 0.0
    beta_R: float = 0.0
    x_first: float = math.nan
    x_last: float = math.nan
    interior_x: np.ndarray = field(default_factory=lambda: np.empty(0))
    level: int = 0
    ops: int = 0


# -- per-rank steps ------------------------------------------------------------

def compute_betas(state, aux):
    """Dot products of the block right-hand side with the Green's segments."""
    f = state.block_f
    state.ops += 4 * f.shape[0]
    return float(np.dot(f, aux.gL)), float(np.dot(f, aux.gR))


def level_reduce(state, aux, lv, layout):
    """One rank's part of the level-``lv`` reductions (a fabric program fragment).

    Ranks left of the root add ``beta_R * Z^R`` at the root's first row, ranks
    right of it add ``beta_L * Z^L`` at its last row. The rank adjacent to the
    root forwards each partial sum. Returns ``(xi_R, xi_L)`` on the root and
    ``None`` elsewhere.
    """
    m, r = state.rank, lv.root
    group = fab.Group(lv.lo, lv.hi, r)
    left, right = fab.split_around(group, r)
    if m < r:
        c = state.beta_R * aux.z_right(layout.first_index[r])
        state.ops += 1
        total = yield fab.reduce_sum(left, c, lv.level)
        if m == left.root:
            yield fab.send(r, total, lv.level)
        return None
    if m > r:
        c = state.beta_L * aux.z_left(layout.last_index[r])
        state.ops += 1
        total = yield fab.reduce_sum(right, c, lv.level)
        if m == right.root:
            yield fab.send(r, total, lv.level)
        return None
    xi_R = float((yield fab.recv(left.root, lv.level))[0]) if not left.empty else 0.0
    xi_L = float((yield fab.recv(right.root, lv.level))[0]) if not right.empty else 0.0
    return xi_R, xi_L


def boundary_solve(xi_R, xi_L, betas, aux):
    """Boundary unknowns of the root's block from the two reduced sums."""
    beta_L, beta_R = betas
    x_first = xi_R + xi_L * aux.ratio_first + beta_L
    x_last = xi_R * aux.ratio_last + xi_L + beta_R
    if not (math.isfinite(x_first) and math.isfinite(x_last)):
        raise NonFiniteRatio(f"rank {aux.rank}: boundary values not finite")
    return x_first, x_last


def _deltas(xi_R, xi_L, state, aux):
    d_left = (xi_L * aux.ratio_first + state.beta_L) * aux.z_left(aux.first - 1)
    d_right = (xi_R * aux.ratio_last + state.beta_R) * aux.z_right(aux.last + 1)
    return d_left, d_right


def propagate_deltas(state, aux, lv, xi):
    """Send corrections from the root to its in-group neighbours; absorb them there.

    The left neighbour adds ``delta`` to ``beta_R`` and ``delta * ratio_first``
    to ``beta_L``; the right neighbour mirrors this with ``ratio_last``.
    """
    m, r = state.rank, lv.root
    if m == r:
        d_left, d_right = _deltas(xi[0], xi[1], state, aux)
        state.ops += 6
        if r > lv.lo:
            yield fab.send(r - 1, d_left, lv.level)
        if r < lv.hi:
            yield fab.send(r + 1, d_right, lv.level)
    elif m == r - 1:
        d = float((yield fab.recv(r, lv.level))[0])
        state.beta_R += d
        state.beta_L += d * aux.ratio_first
        state.ops += 3
    elif m == r + 1:
        d = float((yield fab.recv(r, lv.level))[0])
        state.beta_L += d
        state.beta_R += d * aux.ratio_last
        state.ops += 3


def final_local_solve(state, interior, coupling, dominant):
    """Interior unknowns once both boundary values are known.

    ``interior`` is the principal block on rows ``first+1 .. last-1`` and
    ``coupling = (A[first+1, first], A[last-1, last])``.
    """
    b = state.block_f.shape[0]
    if b <= 2:
        return np.empty(0)
    rhs = state.block_f[1:-1].copy()
    rhs[0] -= coupling[0] * state.x_first
    rhs[-1] -= coupling[1] * state.x_last
    state.ops += 4 + (THOMAS_FLOPS if dominant else PIVOT_FLOPS) * (b - 2)
    return local_solve(interior, rhs, dominant)


def _couplings(A, s, e):
    if isinstance(A, ToeplitzTridiagonal):
        return A.t_minus, A.t_plus
    return float(A.lower[s + 1]), float(A.upper[e - 1])


# -- error monitor -----------------------------------------------------------

def error_bound(gamma, levels, eps=EPS):
    """A-priori bound ``gamma**levels * eps``; ``gamma`` below one counts as one."""
    return max(float(gamma), 1.0) ** levels * eps


def error_monitor(aux_list, levels, eps=EPS):
    """Largest used exterior-vector magnitude and the resulting error bound."""
    gamma = max((a.max_abs_z() for a in aux_list), default=0.0)
    return gamma, error_bound(gamma, levels, eps)


def op_count_model(N, p):
    """Per-rank work shape ``N/p + log2 p`` that rank counters are compared against."""
    return N / p + math.log2(p)


# -- preliminary cache -------------------------------------------------------

_CACHE = OrderedDict()


def clear_cache():
    _CACHE.clear()


def _cached_aux(A, layout, method):
    key = (A.fingerprint(), A.n, layout.p, layout.first_index, method)
    hit = _CACHE.get(key)
    if hit is not None:
        _CACHE.move_to_end(key)
        return hit, True
    value = build_aux(A, layout, method)
    _CACHE[key] = value
    if len(_CACHE) > CACHE_SIZE:
        _CACHE.popitem(last=False)
    return value, False


# -- driver ---------------------------------------------------------------

class DichotomySolver:
    """Reusable solver for one matrix and rank count.

    The preliminary step (Green's segments and exterior-vector values) runs
    once in :meth:`prepare`; each :meth:`solve` then costs
    ``O(N/p + log p)`` per rank.
    """

    def __init__(self, A, p, options=None, layout=None):
        self.A = A
        self.p = int(p)
        self.options = options or SolveOptions()
        self.layout = layout or build_layout(A.n, self.p)
        if not isinstance(self.layout, BlockLayout) or self.layout.n != A.n:
            raise ValueError("layout does not match the matrix")
        self.dominant = is_diagonally_dominant(A)
        self.levels = communication_levels(self.p)
        self.aux = None
        self.method = None
        self.t_step1 = 0.0
        self.cache_hit = False
        self.last_fabric = None
        self.gamma = 0.0
        self.bound = EPS

    def prepare(self):
        if self.aux is not None or self.p == 1:
            return self
        t0 = time.perf_counter()
        (self.aux, self.method), self.cache_hit = _cached_aux(self.A, self.layout,
                                                              self.options.preliminary)
        self._blocks = []
        for m in range(self.p):
            s, e = self.layout.block(m)
            if e - s >= 2:
                inner = self.A.block(s + 1, e)
                self._blocks.append((inner, _couplings(self.A, s, e), is_diagonally_dominant(inner)))
            else:
                self._blocks.append((None, (0.0, 0.0), True))
        self.gamma, self.bound = error_monitor(self.aux, self.levels)
        self.t_step1 = time.perf_counter() - t0
        return self

    def _program(self, f):
        layout, aux_all, blocks = self.layout, self.aux, self._blocks

        def program(m):
            aux = aux_all[m]
            s, e = layout.block(m)
            state = RankState(m, f[s:e + 1])
            state.beta_L, state.beta_R = compute_betas(state, aux)
            for lv in dichotomy_path(layout.p, m):
                state.level = lv.level
                xi = yield from level_reduce(state, aux, lv, layout)
                if m == lv.root:
                    state.x_first, state.x_last = boundary_solve(
                        xi[0], xi[1], (state.beta_L, state.beta_R), aux)
                    state.ops += 6
                yield from propagate_deltas(state, aux, lv, xi)
            inner, coupling, dominant = blocks[m]
            state.interior_x = final_local_solve(state, inner, coupling, dominant)
            return state

        return program

    def solve(self, f):
        """Solve one right-hand side.

        ``t_step2`` covers everything done per right-hand side (fabric run,
        gather and the posterior check); ``t_check`` is the check alone.
        """
        t0 = time.perf_counter()
        f = np.ascontiguousarray(f, dtype=np.float64)
        if f.shape != (self.A.n,):
            raise ValueError(f"right-hand side has shape {f.shape}, expected ({self.A.n},)")
        opts = self.options
        if self.p == 1:
            x = local_solve(self.A, f, self.dominant)
            ops = {0: (THOMAS_FLOPS if self.dominant else PIVOT_FLOPS) * self.A.n}
            return self._report(x, f, t0, ops)

        if self.aux is None:
            self.prepare()
            t0 = time.perf_counter()
        fabric = fab.Fabric(self.p, mode=opts.mode, tree=opts.tree,
                            timeout=opts.timeout, trace=opts.trace)
        states = fabric.run(self._program(f))
        x = np.empty(self.A.n)
        for st in states:
            s, e = self.layout.block(st.rank)
            x[s] = st.x_first
            x[e] = st.x_last
            x[s + 1:e] = st.interior_x
        self.last_fabric = fabric
        ops = {st.rank: st.ops + fabric.additions[st.rank] for st in states}
        return self._report(x, f, t0, ops)

    def solve_series(self, F):
        """Solve for each row of ``F``; the preliminary step is shared."""
        self.prepare()
        return [self.solve(f) for f in np.atleast_2d(F)]

    def _report(self, x, f, t0, ops):
        opts = self.options
        tc = time.perf_counter()
        notes = []
        if self.gamma > opts.gamma_cap or self.bound > opts.accuracy_budget:
            warnings.warn(GammaGuardWarning(
                f"gamma={self.gamma:.3g} over {self.levels} levels gives bound "
                f"{self.bound:.3g} (cap {opts.gamma_cap}, budget {opts.accuracy_budget:g})"),
                stacklevel=3)
            notes.append("gamma_guard")
        res = residual_inf(self.A, x, f)
        if opts.posterior_check or self.gamma > 1.0:
            scale = residual_scale(self.A, x, f)
            if not (res <= opts.residual_tol * max(scale, np.finfo(float).tiny)):
                notes.append("posterior_residual")
        t_end = time.perf_counter()
        return SolveReport(
            solution=x,
            residual_inf=res,
            dominant=self.dominant,
            warnings=notes,
            gamma=self.gamma,
            bound=self.bound,
            levels=self.levels,
            t_step1=self.t_step1,
            t_step2=t_end - t0,
            t_check=t_end - tc,
            ops=ops,
        )


def dichotomy_solve(A, f, p, options=None):
    """Solve ``A x = f`` on ``p`` logical ranks; returns a :class:`SolveReport`."""
    return DichotomySolver(A, p, options).solve(f)

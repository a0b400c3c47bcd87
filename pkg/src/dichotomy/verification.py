"""Acceptance checks shared by the test suite and ``dichotomy verify``.

Each ``criterion_N`` function runs one check and returns a
:class:`CriterionResult`; thresholds are fixed here and never tuned per run.
"""
from __future__ import annotations

import itertools
import math
import sys
import time
import warnings
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import chebyshev as cheb
from .costmodel import CostParams, cost_model, dichotomy_approximation
from .engine import DichotomySolver, SolveOptions, error_bound, error_monitor, op_count_model
from .errors import GammaGuardWarning, Overflow
from .poisson import convergence_study, manufactured, poisson_solve
from .preliminary import (
    _prelim_cheb,
    build_aux,
    build_layout,
    communication_levels,
    green_endpoints_overflow_safe,
    helmholtz_matrix,
    prelim_general,
    prelim_helmholtz_cheb,
)
from .tridiag import ToeplitzTridiagonal, random_dominant, residual_scale, thomas_solve


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    elapsed: float = 0.0
    metrics: dict = field(default_factory=dict)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number}: {self.title} ({self.elapsed:.1f}s) {self.detail}"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.elapsed = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _rel(a, b):
    return float(np.max(np.abs(a - b))) / max(float(np.max(np.abs(b))), 1e-300)


# -- randomized dominant suite ----------------------------------------------

SUITE_N = (64, 1024, 8192)
SUITE_P = (1, 2, 3, 4, 8, 16)


def random_toeplitz(n, rng, margin=0.2):
    tm, tp = rng.uniform(-1.0, 1.0, 2)
    t0 = rng.choice([-1.0, 1.0]) * (abs(tm) + abs(tp) + margin + rng.uniform(0.0, 1.0))
    return ToeplitzTridiagonal(n, tm, t0, tp)


def oracle_suite(count=200, seed=20240601):
    """``count`` reproducible ``(A, f, p)`` cases cycling over sizes, ranks and kinds."""
    rng = np.random.default_rng(seed)
    combos = list(itertools.product(SUITE_N, SUITE_P, ("general", "toeplitz")))
    cases = []
    for i in range(count):
        n, p, kind = combos[i % len(combos)]
        A = random_dominant(n, rng) if kind == "general" else random_toeplitz(n, rng)
        cases.append((A, rng.standard_normal(n), p))
    return cases


def run_suite(cases, mode="deterministic"):
    out = []
    opts = SolveOptions(mode=mode)
    for A, f, p in cases:
        out.append(DichotomySolver(A, p, opts).solve(f))
    return out


@_timed
def criterion_1(count=200):
    """Dichotomy vs sequential Thomas on randomized dominant systems."""
    cases = oracle_suite(count)
    t0 = time.perf_counter()
    reports = run_suite(cases)
    elapsed = time.perf_counter() - t0
    worst_err = worst_res = 0.0
    for (A, f, _), rep in zip(cases, reports):
        ref = thomas_solve(A, f)
        worst_err = max(worst_err, _rel(rep.solution, ref))
        worst_res = max(worst_res, rep.residual_inf / residual_scale(A, rep.solution, f))
    ok = worst_err <= 1e-10 and worst_res <= 1e-11 and elapsed <= 60.0
    return CriterionResult(1, "oracle equivalence", ok,
                           f"max rel err {worst_err:.2e}, max scaled residual {worst_res:.2e}, "
                           f"{len(cases)} systems in {elapsed:.1f}s",
                           metrics={"max_rel_err": worst_err, "max_scaled_residual": worst_res,
                                    "runtime": elapsed})


@_timed
def criterion_2(lams=(-1.0, 0.5, 100.0), N=8192, ps=(4, 32)):
    """Chebyshev-built auxiliary data equals general-path data."""
    h = 1.0 / (N + 1)
    worst = 0.0
    t0 = time.perf_counter()
    for lam in lams:
        T = helmholtz_matrix(lam, h, N)
        for p in ps:
            layout = build_layout(N, p)
            for m in range(p):
                a = prelim_helmholtz_cheb(lam, h, N, layout, m)
                b = prelim_general(T, layout, m)
                worst = max(worst, a.max_rel_diff(b))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed <= 10.0
    return CriterionResult(2, "preliminary-path equality", ok,
                           f"max rel diff {worst:.2e} in {elapsed:.1f}s",
                           metrics={"max_rel_diff": worst, "runtime": elapsed})


def green_oracle(x, n, mL, mR, i, dps=40):
    """High-precision ``(gL_i, gR_i)`` of ``tridiag{1, -2x, 1}`` (1-based indices)."""
    with mpmath.workdps(dps):
        xm = mpmath.mpf(x)
        a = mpmath.acosh(abs(xm))
        sign = -1 if xm < 0 else 1

        def U(k):
            return sign ** k * mpmath.sinh((k + 1) * a) / mpmath.sinh(a)

        un = U(n)
        gl = -U(mL - 1) * U(n - i) / un
        gr = -U(i - 1) * U(n - mR) / un
        return float(gl), float(gr)


@_timed
def criterion_3(x=1.0005, N=10 ** 6, p=4096, stride=64):
    """Overflow-safe Green's endpoints stay finite and exact far beyond N_0."""
    n0 = cheb.n_overflow_threshold(x)
    layout = build_layout(N, p)
    ranks = sorted(set(range(0, p, stride)) | {p - 1})
    worst = 0.0
    finite = True
    for m in ranks:
        s, e = layout.block(m)
        mL, mR = s + 1, e + 1
        aux = _prelim_cheb(x, 1.0, N, layout, m)
        for i, pos in ((mL, 0), (mR, -1)):
            gl, gr = green_endpoints_overflow_safe(x, N, mL, mR, i)
            ol, orr = green_oracle(x, N, mL, mR, i)
            finite &= all(math.isfinite(v) for v in (gl, gr, aux.gL[pos], aux.gR[pos]))
            for val, ref in ((gl, ol), (gr, orr), (aux.gL[pos], ol), (aux.gR[pos], orr)):
                worst = max(worst, abs(val - ref) / abs(ref))
    naive_overflows = True
    for fn in (cheb.u_closed, cheb.u_recurrence):
        try:
            fn(N, x)
            naive_overflows = False
        except Overflow:
            pass
    ok = finite and worst <= 1e-10 and naive_overflows and N > n0
    return CriterionResult(3, "overflow safety", ok,
                           f"N_0={n0}, max rel err {worst:.2e} over {len(ranks)} ranks, "
                           f"direct U_N overflows: {naive_overflows}",
                           metrics={"n0": n0, "max_rel_err": worst})


def _x_grid():
    xs = list(np.linspace(1.0, 5.0, 81)) + [1.0 + 1e-12, 1.0 + 1e-8, 1.0 + 1e-4, 1.0005]
    return xs + [-v for v in xs]


@_timed
def criterion_4(n_max=500):
    """Closed form vs recurrence for U_n, and the exact limits at +-1."""
    worst = 0.0
    mismatched_overflow = 0
    for x in _x_grid():
        for n in range(n_max + 1):
            try:
                rec = cheb.u_recurrence(n, x)
            except Overflow:
                rec = None
            try:
                clo = cheb.u_closed(n, x)
            except Overflow:
                clo = None
            if rec is None or clo is None:
                if (rec is None) != (clo is None):
                    # overflow edge: the finite one must sit at the top of the range
                    val = rec if rec is not None else clo
                    if abs(val) < sys.float_info.max * (1.0 - 1e-10):
                        mismatched_overflow += 1
                continue
            worst = max(worst, abs(clo - rec) / max(abs(rec), 1e-300))
    limits_ok = all(
        cheb.u_closed(n, s) == s ** n * (n + 1) and cheb.u_recurrence(n, s) == s ** n * (n + 1)
        for n in range(n_max + 1) for s in (1.0, -1.0)
    )
    ok = worst <= 1e-10 and limits_ok and mismatched_overflow == 0
    return CriterionResult(4, "Chebyshev suite", ok,
                           f"max rel diff {worst:.2e}, exact limits {limits_ok}, "
                           f"overflow disagreements {mismatched_overflow}",
                           metrics={"max_rel_diff": worst})


@_timed
def criterion_5():
    """Second-order convergence and rank-count invariance of the Poisson solver."""
    t0 = time.perf_counter()
    rows = convergence_study(lam=0.0, p=1)
    orders = [r[3] for r in rows[1:]]
    rhs, _ = manufactured(63)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GammaGuardWarning)
        sols = [poisson_solve(rhs, 0.0, p).values for p in (1, 4, 8)]
    spread = max(_rel(s, sols[0]) for s in sols)
    elapsed = time.perf_counter() - t0
    ok = all(abs(o - 2.0) <= 0.1 for o in orders) and spread <= 1e-10 and elapsed <= 120.0
    return CriterionResult(5, "Poisson convergence", ok,
                           f"orders {', '.join(f'{o:.4f}' for o in orders)}, "
                           f"p-spread {spread:.2e}",
                           metrics={"orders": orders, "p_spread": spread, "runtime": elapsed})


@_timed
def criterion_6(samples=24):
    """Error-bound monitor value and the dominant-system regime."""
    bound = error_bound(3.0, 12, 2.2e-16)
    close = abs(bound - 1.17e-10) / 1.17e-10 < 0.01
    gammas = []
    for A, _, p in oracle_suite(samples, seed=7):
        if p == 1:
            continue
        aux, _ = build_aux(A, build_layout(A.n, p))
        g, b = error_monitor(aux, communication_levels(p))
        gammas.append((g, b))
    dominant_ok = all(g <= 1.0 and b == np.finfo(float).eps for g, b in gammas)
    ok = close and dominant_ok
    gmax = max(g for g, _ in gammas)
    return CriterionResult(6, "error-bound monitor", ok,
                           f"bound(3, 12) = {bound:.4e}, dominant max gamma {gmax:.3f}",
                           metrics={"bound": bound, "dominant_gamma_max": gmax})


@_timed
def criterion_7():
    """Cost formulas at the reference point and the latency-free shorthand."""
    t_dich, t_cyc = cost_model(CostParams(0.0, 1.0, 1.0, 1.0, 1024))
    exact_ok = t_cyc == 40.0 and abs(t_dich - 27.0) < 0.05
    devs = {}
    for p in (256, 512, 1024, 2048, 4096):
        cp = CostParams(0.0, 1.0, 1.0, 1.0, p)
        devs[p] = abs(dichotomy_approximation(cp) / cost_model(cp)[0] - 1.0)
    approx_ok = all(d <= 0.05 for d in devs.values())
    worst_p = max(devs, key=devs.get)
    return CriterionResult(7, "cost model", exact_ok and approx_ok,
                           f"t_cyclic={t_cyc:g}, t_dichotomy={t_dich:.4f}; shorthand deviation "
                           f"{devs[256]:.1%} at p=256, worst {devs[worst_p]:.1%} at p={worst_p}",
                           metrics={"t_dichotomy": t_dich, "t_cyclic": t_cyc, "deviation": devs})


@_timed
def criterion_8(count=200):
    """Bit-reproducible deterministic runs; concurrent runs agree closely."""
    cases = oracle_suite(count)
    first = run_suite(cases)
    second = run_suite(cases)
    identical = all(np.array_equal(a.solution, b.solution) for a, b in zip(first, second))
    conc = run_suite(cases, mode="concurrent")
    worst = max(_rel(c.solution, d.solution) for c, d in zip(conc, first))
    ok = identical and worst <= 1e-12
    return CriterionResult(8, "determinism", ok,
                           f"deterministic bit-identical: {identical}, concurrent max rel diff {worst:.2e}",
                           metrics={"identical": identical, "concurrent_rel_diff": worst})


@_timed
def criterion_9(N=2 ** 16, ps=range(2, 65), seed=11):
    """Per-rank operation counts track N/p + log2 p."""
    rng = np.random.default_rng(seed)
    A = random_dominant(N, rng)
    f = rng.standard_normal(N)
    ratios = {}
    for p in ps:
        rep = DichotomySolver(A, p).solve(f)
        ratios[p] = max(rep.ops.values()) / op_count_model(N, p)
    spread = max(ratios.values()) / min(ratios.values())
    return CriterionResult(9, "complexity counters", spread <= 2.0,
                           f"ops/(N/p+log2 p) in [{min(ratios.values()):.2f}, "
                           f"{max(ratios.values()):.2f}], spread {spread:.3f}",
                           metrics={"spread": spread})


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9)


def run_all(only=None):
    results = []
    for fn in CRITERIA:
        number = int(fn.__name__.rsplit("_", 1)[1])
        if only and number not in only:
            continue
        results.append(fn())
    return results

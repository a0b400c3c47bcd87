import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dichotomy import engine
from dichotomy.engine import (
    DichotomySolver,
    RankState,
    SolveOptions,
    boundary_solve,
    compute_betas,
    dichotomy_solve,
    error_bound,
    error_monitor,
    level_reduce,
    op_count_model,
)
from dichotomy.errors import GammaGuardWarning, NonFiniteRatio, TooManyRanks
from dichotomy.fabric import Fabric
from dichotomy.preliminary import build_aux, build_layout, dichotomy_path, helmholtz_matrix
from dichotomy.tridiag import (
    ToeplitzTridiagonal,
    dense_solve_oracle,
    random_dominant,
    residual_inf,
    residual_scale,
    thomas_solve,
)


def rel_err(x, ref):
    return np.max(np.abs(x - ref)) / np.max(np.abs(ref))


def setup_ranks(A, f, p):
    layout = build_layout(A.n, p)
    aux, _ = build_aux(A, layout)
    states = []
    for m in range(p):
        s, e = layout.block(m)
        st_ = RankState(m, np.asarray(f, dtype=float)[s:e + 1])
        st_.beta_L, st_.beta_R = compute_betas(st_, aux[m])
        states.append(st_)
    return layout, aux, states


# -- compute_betas ---------------------------------------------------------------

def test_betas_zero_rhs(rng):
    A = random_dominant(16, rng)
    _, _, states = setup_ranks(A, np.zeros(16), 4)
    assert all(s.beta_L == 0.0 and s.beta_R == 0.0 for s in states)


def test_betas_unit_vector(rng):
    A = random_dominant(16, rng)
    layout = build_layout(16, 4)
    aux, _ = build_aux(A, layout)
    s, e = layout.block(2)
    f = np.zeros(e - s + 1)
    f[0] = 1.0
    bl, br = compute_betas(RankState(2, f), aux[2])
    assert (bl, br) == (aux[2].gL[0], aux[2].gR[0])


@pytest.mark.parametrize("n", [2, 7, 64])
def test_betas_single_rank_give_boundary_solution(rng, n):
    A = random_dominant(n, rng)
    f = rng.standard_normal(n)
    x = dense_solve_oracle(A, f)
    _, _, (state,) = setup_ranks(A, f, 1)
    assert state.beta_L == pytest.approx(x[0], rel=1e-12, abs=1e-14)
    assert state.beta_R == pytest.approx(x[-1], rel=1e-12, abs=1e-14)


# -- level_reduce / boundary_solve ---------------------------------------------------

def run_level_one(A, f, p):
    layout, aux, states = setup_ranks(A, f, p)

    def program(m):
        lv = dichotomy_path(p, m)[0]
        return (yield from level_reduce(states[m], aux[m], lv, layout))

    return layout, aux, states, Fabric(p).run(program)


def test_level_reduce_empty_left_side(rng):
    A = random_dominant(8, rng)
    _, _, _, out = run_level_one(A, np.ones(8), 2)
    xi_R, xi_L = out[0]
    assert xi_R == 0.0 and xi_L != 0.0
    assert out[1] is None


def test_level_reduce_zero_betas(rng):
    A = random_dominant(12, rng)
    _, _, _, out = run_level_one(A, np.zeros(12), 3)
    assert out[1] == (0.0, 0.0)


def test_level_reduce_matches_dense_boundary_values():
    # invert the boundary formulas at the level-1 root using the exact solution
    A = ToeplitzTridiagonal(8, -1.0, 4.0, -1.0)
    f = np.ones(8)
    x = dense_solve_oracle(A, f)
    layout, aux, states, out = run_level_one(A, f, 4)
    r = 1
    a, st_ = aux[r], states[r]
    s, e = layout.block(r)
    M = np.array([[1.0, a.ratio_first], [a.ratio_last, 1.0]])
    expected = np.linalg.solve(M, [x[s] - st_.beta_L, x[e] - st_.beta_R])
    np.testing.assert_allclose(out[r], expected, rtol=1e-12, atol=1e-14)


def test_boundary_solve_single_rank():
    class Aux:
        ratio_first = 0.3
        ratio_last = -2.0
        rank = 0
    assert boundary_solve(0.0, 0.0, (1.5, -0.5), Aux) == (1.5, -0.5)


def test_boundary_solve_non_finite():
    class Aux:
        ratio_first = 1e308
        ratio_last = 1.0
        rank = 3
    with pytest.raises(NonFiniteRatio):
        boundary_solve(0.0, 1e308, (0.0, 0.0), Aux)


def test_boundary_values_dense_oracle_p2():
    A = ToeplitzTridiagonal(8, -1.0, 4.0, -1.0)
    x = dense_solve_oracle(A, np.ones(8))
    rep = dichotomy_solve(A, np.ones(8), 2)
    for idx in (0, 3, 4, 7):
        assert rep.solution[idx] == pytest.approx(x[idx], abs=1e-12)
    assert np.max(np.abs(rep.solution - x)) <= 1e-12


def test_symmetric_mirror():
    A = ToeplitzTridiagonal(64, -1.0, 3.0, -1.0)
    f = np.sin(np.linspace(0, np.pi, 64))
    x = dichotomy_solve(A, f, 8).solution
    np.testing.assert_allclose(x, x[::-1], rtol=1e-13)


def test_recursion_after_delta_updates_p4():
    A = ToeplitzTridiagonal(16, -1.0, 4.0, -1.0)
    f = np.arange(16.0)
    rep = dichotomy_solve(A, f, 4)
    assert np.max(np.abs(rep.solution - dense_solve_oracle(A, f))) <= 1e-12


def test_zero_rhs_gives_zero():
    A = ToeplitzTridiagonal(40, 1.0, 3.0, 1.0)
    assert not dichotomy_solve(A, np.zeros(40), 5).solution.any()


# -- full solves ---------------------------------------------------------------------

def test_p1_identical_to_thomas(rng, backend):
    A = random_dominant(777, rng)
    f = rng.standard_normal(777)
    np.testing.assert_array_equal(dichotomy_solve(A, f, 1).solution, thomas_solve(A, f))


@pytest.mark.parametrize("p", [2, 4, 8, 16])
def test_dominant_random_n4096(rng, backend, p):
    A = random_dominant(4096, rng)
    f = rng.standard_normal(4096)
    rep = dichotomy_solve(A, f, p)
    assert rel_err(rep.solution, thomas_solve(A, f)) <= 1e-11
    assert rep.residual_inf <= 1e-11 * residual_scale(A, rep.solution, f)
    assert rep.gamma <= 1.0 and rep.warnings == []


@pytest.mark.parametrize("p", [3, 5, 6, 7, 11, 13])
def test_non_power_of_two(rng, p):
    A = random_dominant(301, rng)
    f = rng.standard_normal(301)
    assert rel_err(dichotomy_solve(A, f, p).solution, thomas_solve(A, f)) <= 1e-12


def test_block_of_two_has_no_interior():
    A = ToeplitzTridiagonal(8, -1.0, 4.0, -1.0)
    rep = dichotomy_solve(A, np.ones(8), 4)
    assert np.max(np.abs(rep.solution - dense_solve_oracle(A, np.ones(8)))) <= 1e-12
    assert engine.final_local_solve(RankState(0, np.ones(2)), None, (0, 0), True).size == 0


def test_helmholtz_positive_lambda_uses_pivoting(backend):
    N = 1023
    h = 1.0 / (N + 1)
    T = helmholtz_matrix(500.0, h, N)
    f = np.cos(np.linspace(0, 3, N)) * h * h
    solver = DichotomySolver(T, 8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GammaGuardWarning)
        rep = solver.solve(f)
    assert not rep.dominant
    assert not any(dominant for _, _, dominant in solver._blocks)
    assert rep.residual_inf <= 1e-10 * residual_scale(T, rep.solution, f)
    assert rel_err(rep.solution, dense_solve_oracle(T, f)) <= 1e-9


@pytest.mark.parametrize("mode", ["deterministic", "concurrent"])
def test_modes_agree(rng, mode):
    A = random_dominant(2048, rng)
    f = rng.standard_normal(2048)
    ref = dichotomy_solve(A, f, 8).solution
    got = dichotomy_solve(A, f, 8, SolveOptions(mode=mode)).solution
    assert rel_err(got, ref) <= 1e-12


def test_rank_count_invariance(rng):
    A = random_dominant(1000, rng)
    f = rng.standard_normal(1000)
    sols = [dichotomy_solve(A, f, p).solution for p in (1, 2, 3, 7, 16, 50)]
    assert max(rel_err(s, sols[0]) for s in sols) <= 1e-11


def test_too_many_ranks():
    with pytest.raises(TooManyRanks):
        dichotomy_solve(ToeplitzTridiagonal(7, 1, 4, 1), np.ones(7), 4)


def test_options_validation(monkeypatch):
    with pytest.raises(ValueError):
        SolveOptions(gamma_cap=0.5)
    with pytest.raises(ValueError):
        SolveOptions(mode="parallel")
    monkeypatch.setenv("DICHOTOMY_MODE", "concurrent")
    assert SolveOptions.from_env().mode == "concurrent"


def test_series_reuses_preliminary(rng):
    engine.clear_cache()
    A = random_dominant(2000, rng)
    F = rng.standard_normal((6, 2000))
    solver = DichotomySolver(A, 8)
    reports = solver.solve_series(F)
    assert not solver.cache_hit
    aux_id = id(solver.aux)
    for f, rep in zip(F, reports):
        assert rel_err(rep.solution, thomas_solve(A, f)) <= 1e-12
        assert rep.t_step1 == solver.t_step1
    solver.solve(F[0])
    assert id(solver.aux) == aux_id
    again = DichotomySolver(A, 8).prepare()
    assert again.cache_hit and again.aux is solver.aux


def test_op_counts_scale_with_block_size(rng):
    N = 4096
    A = random_dominant(N, rng)
    f = rng.standard_normal(N)
    ratios = []
    for p in (2, 4, 8, 16, 32):
        rep = DichotomySolver(A, p).solve(f)
        ratios.append(max(rep.ops.values()) / op_count_model(N, p))
    assert max(ratios) / min(ratios) <= 2.0


# -- error monitor ----------------------------------------------------------------

def test_error_bound_examples():
    assert error_bound(3.0, 12, 1e-16) == pytest.approx(5.31441e-11)
    assert 3 ** 12 == 531441
    assert error_bound(3.0, 12, 2.2e-16) == pytest.approx(1.17e-10, rel=1e-3)
    assert error_bound(0.4, 7) == np.finfo(float).eps


def test_monitor_dominant(rng):
    A = random_dominant(512, rng)
    aux, _ = build_aux(A, build_layout(512, 8))
    gamma, bound = error_monitor(aux, 3)
    assert gamma <= 1.0 and bound == np.finfo(float).eps


def test_gamma_guard_warns_for_positive_lambda():
    N = 511
    h = 1.0 / (N + 1)
    T = helmholtz_matrix(20000.0, h, N)
    f = np.ones(N) * h * h
    with pytest.warns(GammaGuardWarning):
        rep = dichotomy_solve(T, f, 8)
    assert rep.gamma > 3.0 and "gamma_guard" in rep.warnings
    assert rep.residual_inf <= 1e-10 * residual_scale(T, rep.solution, f)
    assert "posterior_residual" not in rep.warnings


def test_posterior_check_flags_bad_residual(rng):
    A = random_dominant(64, rng)
    solver = DichotomySolver(A, 2, SolveOptions(residual_tol=0.0))
    rep = solver.solve(rng.standard_normal(64))
    assert "posterior_residual" in rep.warnings


@settings(max_examples=40, deadline=None)
@given(n=st.integers(4, 400), p=st.integers(1, 16), seed=st.integers(0, 10 ** 6),
       toeplitz=st.booleans())
def test_property_oracle_equivalence(n, p, seed, toeplitz):
    p = min(p, n // 2)
    rng = np.random.default_rng(seed)
    if toeplitz:
        tm, tp = rng.uniform(-1, 1, 2)
        A = ToeplitzTridiagonal(n, tm, abs(tm) + abs(tp) + 0.1 + rng.uniform(), tp)
    else:
        A = random_dominant(n, rng)
    f = rng.standard_normal(n)
    rep = dichotomy_solve(A, f, p)
    assert rel_err(rep.solution, dense_solve_oracle(A, f)) <= 1e-10
    assert residual_inf(A, rep.solution, f) <= 1e-11 * residual_scale(A, rep.solution, f)
    assert math.isfinite(rep.bound)

import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dichotomy.errors import GammaGuardWarning, NearEigenvalue
from dichotomy.poisson import (
    Grid2D,
    convergence_study,
    dst,
    dst_direct,
    dst_fast,
    five_point_residual,
    manufactured,
    mode_shift,
    poisson_solve,
    read_grid,
    write_convergence_csv,
    write_grid,
)

pytestmark = pytest.mark.filterwarnings("ignore::dichotomy.errors.GammaGuardWarning")


def test_dst_sine_mode_is_scaled_unit_vector():
    n, k = 15, 4
    v = np.sin(np.pi * k * np.arange(1, n + 1) / (n + 1))
    expected = np.zeros(n)
    expected[k - 1] = math.sqrt((n + 1) / 2)
    np.testing.assert_allclose(dst(v), expected, atol=1e-13)


def test_dst_involution_and_parseval(rng):
    v = rng.standard_normal(127)
    np.testing.assert_allclose(dst(dst(v)), v, rtol=1e-13, atol=1e-14)
    assert np.linalg.norm(dst(v)) == pytest.approx(np.linalg.norm(v), rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 200), seed=st.integers(0, 1000))
def test_property_fast_matches_direct(n, seed):
    v = np.random.default_rng(seed).standard_normal(n)
    np.testing.assert_allclose(dst_fast(v), dst_direct(v), atol=1e-12 * max(1.0, np.abs(v).max()))


def test_dst_along_axis(rng):
    M = rng.standard_normal((5, 9))
    np.testing.assert_allclose(dst(M, axis=1), np.vstack([dst(r) for r in M]), atol=1e-13)
    np.testing.assert_allclose(dst_direct(M, axis=0), dst_fast(M, axis=0), atol=1e-13)


def test_mode_shift_eigenvalues():
    n = 7
    h = 1.0 / (n + 1)
    L = (np.diag(-2 * np.ones(n)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)) / h ** 2
    eig = np.sort(np.linalg.eigvalsh(L))
    mus = np.array([mode_shift(k, h, n) for k in range(1, n + 1)])
    np.testing.assert_allclose(np.sort(-mus), eig, rtol=1e-12)
    assert np.all(np.diff(mus) > 0)
    assert mode_shift(1, 1e-4, 9999) == pytest.approx(math.pi ** 2, rel=1e-7)
    with pytest.raises(ValueError):
        mode_shift(0, h, n)


def test_zero_rhs():
    assert not poisson_solve(Grid2D.zeros(15), 3.0, 2).values.any()


def test_second_order_convergence():
    rows = convergence_study((1 / 64, 1 / 128))
    ratio = rows[0][1] / rows[1][1]
    assert ratio == pytest.approx(4.0, rel=0.1)


@pytest.mark.parametrize("lam", [-1.0, 0.0, 5.0, 37.0, 1024.0, 4096.0])
def test_residual_and_preliminary_agreement(lam):
    rhs, _ = manufactured(63, lam)
    rhs.values[3, 5] += 1.0  # make the right-hand side less special
    a = poisson_solve(rhs, lam, 4, preliminary="chebyshev")
    b = poisson_solve(rhs, lam, 4, preliminary="general")
    c = poisson_solve(rhs, lam, 4, preliminary="toeplitz")
    scale = np.abs(b.values).max()
    assert np.abs(a.values - b.values).max() <= 1e-10 * scale
    assert np.abs(c.values - b.values).max() <= 1e-10 * scale
    assert np.abs(five_point_residual(a, rhs, lam)).max() <= 1e-10 * np.abs(rhs.values).max()


def test_p_invariance():
    rhs, _ = manufactured(31)
    sols = [poisson_solve(rhs, 0.0, p).values for p in (1, 4, 8)]
    for s in sols[1:]:
        assert np.abs(s - sols[0]).max() <= 1e-10 * np.abs(sols[0]).max()


def test_near_eigenvalue_mode():
    n = 15
    h = 1.0 / (n + 1)
    lam = mode_shift(2, h, n) + mode_shift(3, h, n)
    with pytest.raises(NearEigenvalue) as info:
        poisson_solve(Grid2D.zeros(n), lam, 2)
    assert info.value.k in (2, 3)


def test_grid_validation_and_io(tmp_path, rng):
    with pytest.raises(ValueError):
        Grid2D(3, 3, 0.2, np.zeros(9))
    g = Grid2D(3, 3, 0.25, rng.standard_normal(9))
    path = tmp_path / "g.txt"
    write_grid(str(path), g)
    assert path.read_text().splitlines()[0] == "3 3 0.25"
    back = read_grid(str(path))
    np.testing.assert_array_equal(back.values, g.values)
    bad = tmp_path / "bad.txt"
    bad.write_text("3 3 0.25\n1\n2\n")
    with pytest.raises(ValueError):
        read_grid(str(bad))


def test_convergence_csv_format():
    buf = io.StringIO()
    write_convergence_csv(buf, [(0.5, 1.0, 0.5, math.nan), (0.25, 0.25, 0.125, 2.0)])
    lines = buf.getvalue().splitlines()
    assert lines[0] == "h,inf_error,l2_error,order"
    assert lines[1] == "0.5,1.0,0.5," and lines[2] == "0.25,0.25,0.125,2.0"


def test_gamma_guard_silenced_only_here():
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        rhs, _ = manufactured(15, 0.0)
        poisson_solve(rhs, 2000.0, 2)
    assert issubclass(GammaGuardWarning, RuntimeWarning)

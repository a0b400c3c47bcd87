import math

import pytest

from dichotomy.costmodel import CostParams, cost_model, cost_table, dichotomy_approximation


def test_reference_point():
    t_dich, t_cyc = cost_model(CostParams(0.0, 1.0, 1.0, 1.0, 1024))
    assert t_cyc == 40.0
    assert t_dich == pytest.approx((10 - 1023 / 1024) * 3)
    assert round(t_dich, 1) == 27.0


def test_p2_cyclic():
    assert cost_model(CostParams(1.0, 1.0, 1.0, 1.0, 2))[1] == 6.0


def test_latency_terms():
    t_dich, t_cyc = cost_model(CostParams(1.0, 0.0, 0.0, 1.0, 8))
    assert t_dich == (3 + 1) * 3
    assert t_cyc == 2 * 3


def test_approximation_formula():
    cp = CostParams(0.0, 2.0, 4.0, 3.0, 64)
    assert dichotomy_approximation(cp) == 2 * 6 * (3 * 2 + 3 * 4 / 2)


def test_non_power_of_two_warns():
    with pytest.warns(UserWarning):
        t_dich, t_cyc = cost_model(CostParams(0.0, 1.0, 1.0, 1.0, 100))
    assert t_cyc == 2 * 7 * 2


@pytest.mark.parametrize("kw", [dict(alpha=-1.0), dict(beta=-1.0), dict(gamma=-0.1), dict(l=-2.0), dict(p=1)])
def test_params_validation(kw):
    base = dict(alpha=0.0, beta=1.0, gamma=1.0, l=1.0, p=4)
    base.update(kw)
    with pytest.raises(ValueError):
        CostParams(**base)


def test_table_rows():
    rows = cost_table(4096)
    assert [r[0] for r in rows] == [2 ** k for k in range(1, 13)]
    row = dict((r[0], r) for r in rows)[1024]
    assert row[2] == 40.0 and math.isclose(row[1], 27.0029296875)

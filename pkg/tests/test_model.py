import math
from fractions import Fraction as F

import pytest

from edr.model import (
    AgentSpec,
    Decomposition,
    Distribution,
    LeximinKey,
    Profile,
    WelfareSpec,
    as_fraction,
    cobb_douglas_log_utility,
    critical_set,
    g_welfare,
    is_exact,
    leontief_utility,
    leximin_compare,
    nash_welfare,
    utilities,
)

EQ1 = (F(300), F(300), F(300), F(100))


def test_as_fraction_forms():
    assert as_fraction("950/3") == F(950, 3)
    assert as_fraction("316.5") == F(633, 2)
    assert as_fraction(2) == F(2)
    assert as_fraction(F(1, 3)) == F(1, 3)


def test_is_exact():
    assert is_exact([F(1), 2])
    assert not is_exact([F(1), 2.0])


def test_utilities_example1(example1):
    assert leontief_utility(example1, 0, EQ1) == 300
    assert leontief_utility(example1, 1, EQ1) == 100
    assert utilities(example1, Distribution.of(EQ1)) == (300, 100)


def test_utility_uses_valuation_weights(ex62):
    assert utilities(ex62, (F(12), F(24), F(24))) == (12, 24)


def test_critical_sets_example1(example1):
    assert critical_set(example1, 0, EQ1) == {0, 1, 2}
    assert critical_set(example1, 1, EQ1) == {3}


def test_critical_set_float_tolerance(example1):
    d = (300.0, 300.0 * (1 + 1e-12), 300.0 * (1 + 1e-6), 100.0)
    assert critical_set(example1, 0, d) == {0, 1}


def test_nash_welfare(example1, example2):
    assert nash_welfare(example1, EQ1) == pytest.approx(900 * math.log(300) + 100 * math.log(100))
    d = (50,) + (25,) * 10
    assert nash_welfare(example2, d) == pytest.approx(300 * math.log(25))


def test_nash_welfare_zero_utility(example1):
    assert nash_welfare(example1, (0, 500, 500, 0)) == -math.inf


def test_zero_contribution_ignored_in_welfare():
    p = Profile.from_matrix([[1, 0], [0, 1]], [5, 0])
    assert nash_welfare(p, (5, 0)) == pytest.approx(5 * math.log(5))


def test_cobb_douglas_log_utility():
    p = Profile.from_matrix([[1, 1, 0], [0, 1, 1]], [6, 6])
    assert math.exp(cobb_douglas_log_utility(p, 0, (4, 4, 4))) == pytest.approx(16)
    assert math.exp(cobb_douglas_log_utility(p, 0, (3, 6, 3))) == pytest.approx(18)


def test_profile_validation():
    with pytest.raises(ValueError, match="duplicate agent"):
        Profile(("a",), (AgentSpec("x", F(1), {"a": F(1)}), AgentSpec("x", F(1), {"a": F(1)})))
    with pytest.raises(ValueError, match="unknown charities"):
        Profile(("a",), (AgentSpec("x", F(1), {"b": F(1)}),))
    with pytest.raises(ValueError, match="negative contribution"):
        Profile(("a",), (AgentSpec("x", F(-1), {"a": F(1)}),))
    with pytest.raises(ValueError, match="values no charity"):
        Profile(("a",), (AgentSpec("x", F(1), {}),))


def test_profile_accessors(example1):
    assert example1.n == 2 and example1.m == 4
    assert example1.endowment == 1000
    assert example1.approvals == ((0, 1, 2), (2, 3))
    assert example1.is_binary
    p = example1.with_contribution(1, 200)
    assert p.contributions == (900, 200)
    q = example1.with_values(1, [0, 0, 1, 2])
    assert q.values[1] == (0, 0, 1, 2) and not q.is_binary
    assert example1.scaled_contributions(2).endowment == 2000


def test_reduce_drops_idle_agents_and_charities():
    p = Profile.from_matrix([[1, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], [3, 0, 2])
    red = p.reduce()
    assert red.agent_map == (0, 2)
    assert red.charity_map == (0, 1, 3)
    assert red.expand_distribution((1, 2, 2)) == (1, 2, 0, 2)
    assert red.restrict_distribution((1, 2, 0, 2)) == (1, 2, 2)
    rows = red.expand_rows([(1, 2, 0), (0, 0, 2)])
    assert rows[1] == (0, 0, 0, 0) and rows[2] == (0, 0, 0, 2)


def test_decomposition_consistency(example1):
    rows = ((F(300), F(300), F(300), F(0)), (F(0), F(0), F(0), F(100)))
    dec = Decomposition(rows)
    assert dec.column_sums() == EQ1
    assert dec.is_consistent(example1, EQ1)
    assert not dec.is_consistent(example1, (F(250),) * 4)


def test_leximin():
    assert leximin_compare((20, 20, 20), (12, 24, 24)) == 1
    assert leximin_compare((12, 24, 24), (24, 12, 24)) == 0
    assert LeximinKey.of((1, 5)) < LeximinKey.of((2, 2))
    with pytest.raises(ValueError):
        leximin_compare((1,), (1, 2))


def test_welfare_spec():
    assert WelfareSpec.power(1)(F(3)) == 3
    assert WelfareSpec.power(-1)(F(2)) == F(-1, 2)
    assert WelfareSpec.power(-1)(0) == -math.inf
    assert WelfareSpec.nash().x_dg_nonincreasing()
    assert not WelfareSpec.power(2).x_dg_nonincreasing()
    with pytest.raises(ValueError):
        WelfareSpec.power(0)


def test_g_welfare_positive_power():
    p = Profile.from_matrix([[1, 0], [1, 1]], [2, 1])
    w = WelfareSpec.power(1)
    assert g_welfare(p, (F(2), F(1)), w) == 5
    assert g_welfare(p, (F(3), F(0)), w) == 6

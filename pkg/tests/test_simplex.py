from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from edr.simplex import LinearProgram, check_farkas, simplex_solve


def test_simple_max():
    lp = LinearProgram(2)
    lp.add_constraint({0: 1, 1: 1}, "<=", 4)
    lp.add_constraint({0: 1, 1: 3}, "<=", 6)
    lp.objective = {0: 3, 1: 2}
    res = simplex_solve(lp)
    assert res.optimal and res.value == 12 and res.x == (4, 0)


def test_rational_optimum():
    lp = LinearProgram(2)
    lp.add_constraint({0: 3, 1: 1}, "<=", 1)
    lp.add_constraint({0: 1, 1: 3}, "<=", 1)
    lp.objective = {0: 1, 1: 1}
    res = simplex_solve(lp)
    assert res.value == F(1, 2) and res.x == (F(1, 4), F(1, 4))
    # complementary slackness: both rows tight, duals 1/4 each
    assert res.duals == (F(1, 4), F(1, 4))


def test_infeasible_has_farkas():
    lp = LinearProgram(2)
    lp.add_constraint({0: 1, 1: 1}, "==", 3)
    lp.add_constraint({0: 1}, "<=", 1)
    lp.add_constraint({1: 1}, "<=", 1)
    res = simplex_solve(lp)
    assert res.status == "infeasible"
    assert check_farkas(lp, res.farkas)


def test_unbounded():
    lp = LinearProgram(2)
    lp.add_constraint({0: 1, 1: -1}, "<=", 1)
    lp.objective = {0: 1}
    assert simplex_solve(lp).status == "unbounded"


def test_upper_bounds_and_equalities():
    lp = LinearProgram(3, upper={0: F(1, 2)})
    lp.add_constraint({0: 1, 1: 1, 2: 1}, "==", 2)
    lp.add_constraint({1: 1}, ">=", F(1, 3))
    lp.objective = {0: 2, 1: 1}
    res = simplex_solve(lp)
    assert res.x[0] == F(1, 2) and res.value == F(1) + F(3, 2)


def test_bad_sense_and_index():
    lp = LinearProgram(1)
    with pytest.raises(ValueError):
        lp.add_constraint({0: 1}, "<", 1)
    with pytest.raises(ValueError):
        lp.add_constraint({3: 1}, "<=", 1)


def test_degenerate_does_not_cycle():
    # Beale's classic cycling example, in maximisation form.
    lp = LinearProgram(4)
    lp.add_constraint({0: F(1, 4), 1: -60, 2: F(-1, 25), 3: 9}, "<=", 0)
    lp.add_constraint({0: F(1, 2), 1: -90, 2: F(-1, 50), 3: 3}, "<=", 0)
    lp.add_constraint({2: 1}, "<=", 1)
    lp.objective = {0: F(3, 4), 1: -150, 2: F(1, 50), 3: -6}
    res = simplex_solve(lp)
    assert res.optimal and res.value == F(1, 20)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_random_lps_match_scipy(seed):
    rng = np.random.default_rng(seed)
    n, k = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    A = rng.integers(-3, 4, size=(k, n))
    b = rng.integers(0, 6, size=k)
    c = rng.integers(-3, 4, size=n)
    lp = LinearProgram(n)
    for row, rhs in zip(A, b):
        lp.add_constraint({j: int(a) for j, a in enumerate(row)}, "<=", int(rhs))
    for j in range(n):
        lp.upper[j] = F(5)
    lp.objective = {j: int(a) for j, a in enumerate(c)}
    res = simplex_solve(lp)
    ref = linprog(-c, A_ub=A, b_ub=b, bounds=[(0, 5)] * n, method="highs")
    assert res.optimal and ref.status == 0
    assert float(res.value) == pytest.approx(-ref.fun, abs=1e-9)
    x = np.array([float(a) for a in res.x])
    assert (A @ x <= b + 1e-12).all()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_feasibility_verdict_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    n, k = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    A = rng.integers(-2, 3, size=(k, n))
    b = rng.integers(-3, 4, size=k)
    lp = LinearProgram(n)
    for row, rhs in zip(A, b):
        lp.add_constraint({j: int(a) for j, a in enumerate(row)}, "==", int(rhs))
    res = simplex_solve(lp)
    ref = linprog(np.zeros(n), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    assert (res.status == "optimal") == (ref.status == 0)
    if res.status == "infeasible":
        assert check_farkas(lp, res.farkas)

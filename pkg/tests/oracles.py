"""Reference implementations used only to check the package.

Each one takes a different route from the code under test: best responses by
enumerating candidate supports, decomposition feasibility through scipy's LP solver,
and the Nash-welfare maximiser through a conic solver.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog


def best_response_by_support(external, weights, budget):
    """Leontief best response: try every support S and keep the consistent one.

    On S the level L solves sum_S (L w_x - e_x) = budget; outside S funding already
    meets L.  Exact with Fractions.
    """
    m = len(weights)
    approved = [x for x in range(m) if weights[x] > 0]
    for k in range(1, len(approved) + 1):
        for S in itertools.combinations(approved, k):
            L = (budget + sum(external[x] for x in S)) / sum(weights[x] for x in S)
            if any(L * weights[x] < external[x] for x in S):
                continue
            if any(external[x] < L * weights[x] for x in approved if x not in S):
                continue
            return tuple(L * weights[x] - external[x] if x in S else 0 * budget for x in range(m))
    raise AssertionError("no consistent support")


def critical(values_row, d, rel=0.0):
    ratios = {x: d[x] / values_row[x] for x in range(len(d)) if values_row[x] > 0}
    u = min(ratios.values())
    return {x for x, r in ratios.items() if r <= u * (1 + rel)}


def decomposable_on_critical(values, contributions, d, rel=1e-9, slack=1e-7):
    """Is there y >= 0 with row sums C_i, column sums d, supported on critical sets?"""
    n, m = len(values), len(d)
    d = [float(a) for a in d]
    C = [float(c) for c in contributions]
    V = [[float(v) for v in row] for row in values]
    var = [(i, x) for i in range(n) for x in critical(V[i], d, rel) if C[i] > 0]
    if not var:
        return all(a <= slack for a in d)
    A_eq, b_eq = [], []
    for i in range(n):
        if C[i] > 0:
            A_eq.append([1.0 if k[0] == i else 0.0 for k in var])
            b_eq.append(C[i])
    A_ub, b_ub = [], []
    for x in range(m):
        row = [1.0 if k[1] == x else 0.0 for k in var]
        A_ub += [row, [-a for a in row]]
        b_ub += [d[x] + slack, -d[x] + slack]
    # HiGHS presolve misreports some thin-slab problems as infeasible
    res = linprog(
        np.zeros(len(var)),
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
        options={"presolve": False},
    )
    return res.status == 0


def nash_maximiser(values, contributions):
    """Maximise sum C_i log u_i with u_i <= d_x / v_ix over the simplex, via cvxpy."""
    import cvxpy as cp

    n, m = len(values), len(values[0])
    C = np.array([float(c) for c in contributions])
    total = C.sum()
    d = cp.Variable(m, nonneg=True)
    u = cp.Variable(n)
    cons = [cp.sum(d) == total]
    for i in range(n):
        for x in range(m):
            if values[i][x] > 0:
                cons.append(u[i] * float(values[i][x]) <= d[x])
    active = [i for i in range(n) if C[i] > 0]
    prob = cp.Problem(cp.Maximize(sum(C[i] / total * cp.log(u[i]) for i in active)), cons)
    prob.solve(solver=cp.CLARABEL)
    return [float(a) for a in d.value]


def nash_value(values, contributions, d):
    total = 0.0
    for row, c in zip(values, contributions):
        if c == 0:
            continue
        u = min(float(d[x]) / float(row[x]) for x in range(len(d)) if row[x] > 0)
        if u <= 0:
            return -math.inf
        total += float(c) * math.log(u)
    return total


def frac_row(row):
    return tuple(Fraction(a) for a in row)

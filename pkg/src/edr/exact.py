"""Exact solvers: leximin LPs for approval profiles, decomposition extraction and rational snapping."""

from __future__ import annotations

import itertools
import time
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from . import dynamics
from .model import TAU_CRIT, EquilibriumResult, Profile, critical_set, is_exact, nash_welfare, utilities
from .simplex import LinearProgram, check_farkas, simplex_solve


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class LeximinSolution:
    values: tuple
    x: tuple
    lps: int


def leximin_solve(base: LinearProgram, objectives: Sequence[Dict[int, object]]) -> LeximinSolution:
    """Leximin-maximal vector of the linear ``objectives`` over the feasible set of ``base``.

    Each round maximises the smallest free objective.  Objectives whose lower-bound row
    carries a nonzero dual at that optimum are tight in every optimal solution, so they
    are fixed at the level; at least one is fixed per round.
    """
    objectives = [{j: Fraction(a) for j, a in f.items()} for f in objectives]
    if not objectives:
        res = simplex_solve(base)
        if res.status == "infeasible":
            raise InfeasibleError("base program is infeasible")
        return LeximinSolution((), res.x[: base.num_vars] if res.x else (), 1)
    fixed: Dict[int, Fraction] = {}
    lps = 0
    x = None
    while len(fixed) < len(objectives):
        lp = base.copy()
        tp, tm = lp.add_var(), lp.add_var()
        rows = {}
        for k, f in enumerate(objectives):
            if k in fixed:
                lp.add_constraint(f, "==", fixed[k])
            else:
                coeffs = dict(f)
                coeffs[tp] = Fraction(-1)
                coeffs[tm] = Fraction(1)
                rows[k] = lp.add_constraint(coeffs, ">=", 0)
        lp.objective = {tp: Fraction(1), tm: Fraction(-1)}
        res = simplex_solve(lp)
        lps += 1
        if res.status == "infeasible":
            raise InfeasibleError("base program is infeasible")
        if res.status == "unbounded":
            raise ValueError("some objective is unbounded over the base program")
        level = res.value
        x = res.x
        tight = [k for k, r in rows.items() if res.duals[r] != 0]
        if not tight:  # cannot happen for a bounded max-min; guard against a silent loop
            raise RuntimeError("leximin round fixed no objective")
        for k in tight:
            fixed[k] = level
    return LeximinSolution(tuple(fixed[k] for k in range(len(objectives))), tuple(x[: base.num_vars]), lps)


def _check_binary(profile: Profile, strict: bool, rule: str) -> None:
    if profile.is_binary:
        return
    if strict:
        raise ValueError(f"{rule} needs binary (0/1) valuations")
    warnings.warn(
        f"{rule}: valuations are not binary; using A_i = {{x : v_ix > 0}} as approval sets. "
        "The result need not be the equilibrium distribution.",
        UserWarning,
        stacklevel=3,
    )


def _decomposable_base(sub: Profile):
    """Variables ``delta_ix`` for ``x in A_i`` with row sums ``C_i``; returns (lp, var index map)."""
    var = {}
    for i in range(sub.n):
        for x in sub.approvals[i]:
            var[i, x] = len(var)
    lp = LinearProgram(len(var))
    for i in range(sub.n):
        lp.add_constraint({var[i, x]: 1 for x in sub.approvals[i]}, "==", sub.contributions[i])
    return lp, var


def _rows_from(sub: Profile, var, x) -> tuple:
    rows = [[Fraction(0)] * sub.m for _ in range(sub.n)]
    for (i, c), j in var.items():
        rows[i][c] = x[j]
    return tuple(tuple(r) for r in rows)


def _finish(profile: Profile, red, rows_sub, method, start, lps, extra=None) -> EquilibriumResult:
    dist_sub = dynamics.column_totals(rows_sub)
    dist = red.expand_distribution(dist_sub)
    dec = extract_decomposition(profile, dist)
    rows = dec.rows if dec.ok else red.expand_rows(rows_sub)
    info = {"lps": lps, "equilibrium": dec.ok}
    info.update(extra or {})
    return EquilibriumResult(
        distribution=dist,
        decomposition=rows,
        utilities=utilities(profile, dist),
        nash_welfare=nash_welfare(profile, dist),
        residual=dynamics.residual(profile, rows),
        exact=True,
        method=method,
        iterations=lps,
        converged=True,
        wall_time=time.perf_counter() - start,
        extra=info,
    )


def charity_egalitarian(profile: Profile, strict: bool = False) -> EquilibriumResult:
    """Leximin-maximal charity funding vector among decomposable distributions."""
    _check_binary(profile, strict, "charity_egalitarian")
    start = time.perf_counter()
    red = profile.reduce()
    sub = red.sub
    lp, var = _decomposable_base(sub)
    objectives = [{var[i, x]: 1 for i in range(sub.n) if (i, x) in var} for x in range(sub.m)]
    sol = leximin_solve(lp, objectives)
    return _finish(profile, red, _rows_from(sub, var, sol.x), "charity-egalitarian", start, sol.lps)


def conditional_egalitarian(profile: Profile, strict: bool = False) -> EquilibriumResult:
    """Leximin-maximal utility vector among decomposable distributions.

    Utilities are the weighted Leontief ones: ``u_i * v_ix <= delta(x)`` for ``x in A_i``.
    """
    _check_binary(profile, strict, "conditional_egalitarian")
    start = time.perf_counter()
    red = profile.reduce()
    sub = red.sub
    lp, var = _decomposable_base(sub)
    u = [lp.add_var() for _ in range(sub.n)]
    for i in range(sub.n):
        for x in sub.approvals[i]:
            coeffs = {var[j, x]: 1 for j in range(sub.n) if (j, x) in var}
            coeffs[u[i]] = coeffs.get(u[i], 0) - sub.values[i][x]
            lp.add_constraint(coeffs, ">=", 0)
    sol = leximin_solve(lp, [{u[i]: 1} for i in range(sub.n)])
    res = _finish(profile, red, _rows_from(sub, var, sol.x), "conditional-egalitarian", start, sol.lps)
    return res


@dataclass(frozen=True)
class DecompositionCheck:
    """Outcome of the critical-set transportation problem.

    ``rows`` is a decomposition supported on critical sets when ``ok``; otherwise
    ``farkas`` certifies infeasibility and ``hall_set`` (when found) is a set of
    charities whose funding exceeds what the agents critical on them can supply.
    """

    ok: bool
    rows: tuple = ()
    critical: tuple = ()
    farkas: Optional[tuple] = None
    hall_set: Optional[frozenset] = None
    demand: Optional[Fraction] = None
    supply: Optional[Fraction] = None


def extract_decomposition(profile: Profile, d: Sequence, tol: float = 0.0, tau: float = TAU_CRIT) -> DecompositionCheck:
    """Find a decomposition of ``d`` in which every agent funds only her critical charities.

    Exact inputs are checked exactly.  For float inputs, critical sets use relative
    tolerance ``tau`` and column sums may miss ``d`` by ``tol * C_N``.
    """
    d = tuple(d)
    exact = is_exact(d) and tol == 0
    crit = []
    for i in range(profile.n):
        if profile.contributions[i] == 0:
            crit.append(frozenset())
        else:
            crit.append(critical_set(profile, i, d, tau))
    dq = [Fraction(a) for a in d]
    var = {}
    for i, T in enumerate(crit):
        for x in sorted(T):
            var[i, x] = len(var)
    lp = LinearProgram(len(var))
    for i in range(profile.n):
        if profile.contributions[i] > 0:
            lp.add_constraint({var[i, x]: 1 for x in sorted(crit[i])}, "==", profile.contributions[i])
    slack = Fraction(0) if exact else Fraction(tol) * profile.endowment
    for x in range(profile.m):
        coeffs = {var[i, x]: 1 for i in range(profile.n) if (i, x) in var}
        if slack == 0:
            lp.add_constraint(coeffs, "==", dq[x])
        else:
            lp.add_constraint(coeffs, "<=", dq[x] + slack)
            lp.add_constraint(coeffs, ">=", max(Fraction(0), dq[x] - slack))
    res = simplex_solve(lp)
    if res.status == "optimal":
        rows = [[Fraction(0)] * profile.m for _ in range(profile.n)]
        for (i, x), j in var.items():
            rows[i][x] = res.x[j]
        if not exact:
            rows = [[float(a) for a in r] for r in rows]
        return DecompositionCheck(True, tuple(tuple(r) for r in rows), tuple(crit))
    assert check_farkas(lp, res.farkas)
    hall = _hall_set(profile, dq, crit, slack)
    if hall is None:
        return DecompositionCheck(False, critical=tuple(crit), farkas=res.farkas)
    S, dem, sup = hall
    return DecompositionCheck(False, critical=tuple(crit), farkas=res.farkas, hall_set=S, demand=dem, supply=sup)


def _hall_set(profile, dq, crit, slack):
    """A charity set whose demand exceeds the contributions of agents critical on it.

    Tries funded charities nobody is critical on, then the complement of what each
    agent group can reach (groups of up to 16 agents), then every charity subset
    when there are at most 16 charities.
    """
    m = profile.m
    C = profile.contributions

    def test(S):
        demand = sum((dq[x] for x in S), Fraction(0)) - slack * len(S)
        supply = sum((C[i] for i, T in enumerate(crit) if T & S), Fraction(0))
        return (frozenset(S), demand, supply) if demand > supply else None

    # Charities nobody is critical on but that are funded form a witness by themselves.
    orphans = frozenset(x for x in range(m) if dq[x] > slack and not any(x in T for T in crit))
    if orphans:
        hit = test(orphans)
        if hit:
            return hit
    # Complements of agent-closed sets: agents in G can only reach charities in A(G).
    n = profile.n
    agents = [i for i in range(n) if C[i] > 0]
    if len(agents) <= 16:
        for r in range(1, len(agents) + 1):
            for G in itertools.combinations(agents, r):
                reach = frozenset().union(*(crit[i] for i in G))
                demand = sum((dq[x] for x in reach), Fraction(0)) + slack * len(reach)
                supply = sum((C[i] for i in G), Fraction(0))
                if supply > demand:
                    rest = frozenset(range(m)) - reach
                    hit = test(rest)
                    if hit:
                        return hit
    if m <= 16:
        for r in range(1, m + 1):
            for S in itertools.combinations(range(m), r):
                hit = test(frozenset(S))
                if hit:
                    return hit
    return None


def critical_structure(profile: Profile, d: Sequence, tau: float) -> tuple:
    return tuple(critical_set(profile, i, d, tau) for i in range(profile.n))


def _snap_once(sub: Profile, d: Sequence, tau: float):
    crit = critical_structure(sub, d, tau)
    parent = list(range(sub.m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for T in crit:
        T = sorted(T)
        for y in T[1:]:
            parent[find(y)] = find(T[0])
    # Relative amounts inside each component, propagated through shared critical sets.
    rel: Dict[int, Fraction] = {}
    adj: Dict[int, List[tuple]] = {}
    for i, T in enumerate(crit):
        T = sorted(T)
        for y in T[1:]:
            adj.setdefault(T[0], []).append((y, i))
            adj.setdefault(y, []).append((T[0], i))
    v = sub.values
    covered = set().union(*crit)
    for root in sorted(covered):
        if root in rel:
            continue
        rel[root] = Fraction(1)
        stack = [root]
        while stack:
            a = stack.pop()
            for b, i in adj.get(a, ()):
                want = rel[a] * v[i][b] / v[i][a]
                if b in rel:
                    if rel[b] != want:
                        return None
                else:
                    rel[b] = want
                    stack.append(b)
    budget: Dict[int, Fraction] = {}
    for i, T in enumerate(crit):
        r = find(next(iter(T)))
        budget[r] = budget.get(r, Fraction(0)) + sub.contributions[i]
    weight: Dict[int, Fraction] = {}
    for x in covered:
        r = find(x)
        weight[r] = weight.get(r, Fraction(0)) + rel[x]
    out = [Fraction(0)] * sub.m
    for x in covered:
        r = find(x)
        out[x] = budget[r] * rel[x] / weight[r]
    return tuple(out)


#: Tolerances tried in order: the given one, three relaxations by 10x, then two tightenings.
SNAP_SCHEDULE = (1, 10, 100, 1000, 1e-2, 1e-4)


def snap_to_rational(profile: Profile, d_float: Sequence, tau: float = TAU_CRIT) -> Optional[EquilibriumResult]:
    """Exact equilibrium guessed from the critical sets of a float near-equilibrium, or ``None``.

    The guessed critical sets link charities into components whose amounts are fixed up to
    scale by ``d_x / v_ix = d_y / v_iy``; each component receives the contributions of the
    agents critical on it.  Candidates are accepted only after exact verification.
    """
    start = time.perf_counter()
    d_float = tuple(d_float)
    if is_exact(d_float):
        check = extract_decomposition(profile, d_float)
        if check.ok and sum(d_float) == profile.endowment:
            return _exact_result(profile, d_float, check.rows, "snap", start, {"tau": None})
    red = profile.reduce()
    sub_d = red.restrict_distribution(d_float)
    tried = set()
    for factor in SNAP_SCHEDULE:
        t = tau * factor
        guess = _snap_once(red.sub, sub_d, t)
        if guess is None or guess in tried:
            continue
        tried.add(guess)
        full = red.expand_distribution(guess)
        check = extract_decomposition(profile, full)
        if check.ok:
            return _exact_result(profile, full, check.rows, "snap", start, {"tau": t})
    return None


def _exact_result(profile, dist, rows, method, start, extra) -> EquilibriumResult:
    return EquilibriumResult(
        distribution=tuple(dist),
        decomposition=tuple(rows),
        utilities=utilities(profile, dist),
        nash_welfare=nash_welfare(profile, dist),
        residual=dynamics.residual(profile, rows),
        exact=True,
        method=method,
        iterations=0,
        converged=True,
        wall_time=time.perf_counter() - start,
        extra=extra,
    )

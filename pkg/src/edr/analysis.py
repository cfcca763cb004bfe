"""Certificates for equilibrium, efficiency and Lindahl prices, plus a brute-force Nash oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .exact import extract_decomposition
from .model import TAU_CRIT, EquilibriumResult, Profile, critical_set, is_exact, leontief_utility


@dataclass(frozen=True)
class Certificate:
    """Verdict of :func:`is_equilibrium`.

    Accepted: ``decomposition`` is supported on critical sets.  Refuted: ``farkas``
    certifies that the critical-set transportation problem is infeasible and
    ``hall_set`` names charities funded beyond what their critical agents can pay.
    """

    accepted: bool
    exact: bool
    decomposition: tuple = ()
    critical: tuple = ()
    farkas: Optional[tuple] = None
    hall_set: Optional[frozenset] = None
    demand: object = None
    supply: object = None

    def __bool__(self):
        return self.accepted


def _check_total(profile: Profile, d, tol):
    total = sum(d)
    C = profile.endowment
    if is_exact(d) and tol == 0:
        if total != C:
            raise ValueError(f"distribution sums to {total}, expected {C}")
    elif abs(float(total) - float(C)) > max(tol, 1e-12) * float(C):
        raise ValueError(f"distribution sums to {float(total)!r}, expected {float(C)!r}")


def is_equilibrium(profile: Profile, d: Sequence, mode: str = "auto", tol: float = 1e-9, tau: float = TAU_CRIT) -> Certificate:
    """Certify or refute that ``d`` is the equilibrium distribution.

    ``mode`` is ``exact``, ``float`` or ``auto`` (exact iff ``d`` is exact).  Float mode
    reads critical sets with relative tolerance ``tau`` and lets column sums miss by
    ``tol * C_N``.
    """
    d = tuple(d)
    if mode == "auto":
        mode = "exact" if is_exact(d) else "float"
    if mode == "exact":
        d = tuple(Fraction(a) for a in d)
        tol = 0.0
    elif mode != "float":
        raise ValueError(f"unknown mode {mode!r}")
    _check_total(profile, d, tol)
    check = extract_decomposition(profile, d, tol=tol, tau=tau)
    return Certificate(
        accepted=check.ok,
        exact=mode == "exact",
        decomposition=check.rows,
        critical=check.critical,
        farkas=check.farkas,
        hall_set=check.hall_set,
        demand=check.demand,
        supply=check.supply,
    )


@dataclass(frozen=True)
class EfficiencyVerdict:
    efficient: bool
    witness: Optional[int] = None

    def __bool__(self):
        return self.efficient


def is_efficient(profile: Profile, d: Sequence, mode: str = "auto", tau: float = TAU_CRIT) -> EfficiencyVerdict:
    """Efficient iff every funded charity is critical for some agent; else the first uncovered one."""
    d = tuple(d)
    if mode == "exact" or (mode == "auto" and is_exact(d)):
        d = tuple(Fraction(a) for a in d)
        funded = [x for x in range(profile.m) if d[x] > 0]
    else:
        d = tuple(float(a) for a in d)
        floor = tau * float(profile.endowment)
        funded = [x for x in range(profile.m) if d[x] > floor]
    covered = set()
    for i in range(profile.n):
        covered |= critical_set(profile, i, d, tau)
    for x in funded:
        if x not in covered:
            return EfficiencyVerdict(False, x)
    return EfficiencyVerdict(True)


@dataclass(frozen=True)
class LindahlPrices:
    """Personal prices ``prices[i][x]`` with the checks that make them a Lindahl equilibrium.

    ``budgets_ok``: each agent's spending at these prices equals her contribution.
    ``columns_ok``: prices sum to 1 on funded charities and at most 1 elsewhere.
    ``demand_ok``: at these prices the best affordable utility equals the one she gets.
    """

    prices: tuple
    budgets_ok: bool
    columns_ok: bool
    demand_ok: bool

    @property
    def ok(self) -> bool:
        return self.budgets_ok and self.columns_ok and self.demand_ok


def lindahl_prices(profile: Profile, eq: EquilibriumResult) -> LindahlPrices:
    """Prices ``p_i(x) = delta_i(x) / delta(x)`` on funded charities, ``0`` elsewhere."""
    d = tuple(eq.distribution)
    rows = eq.decomposition
    cert_ok = _supported_on_critical(profile, d, rows, eq.exact)
    if not cert_ok:
        raise ValueError("decomposition is not supported on critical sets; verify the equilibrium first")
    exact = eq.exact and is_exact(d)
    zero = Fraction(0) if exact else 0.0
    prices = tuple(
        tuple((rows[i][x] / d[x]) if d[x] > 0 else zero for x in range(profile.m)) for i in range(profile.n)
    )

    def close(a, b):
        return a == b if exact else abs(float(a) - float(b)) <= 1e-9 * max(1.0, abs(float(b)))

    budgets_ok = all(
        close(sum(prices[i][x] * d[x] for x in range(profile.m)), profile.contributions[i]) for i in range(profile.n)
    )
    columns_ok = True
    for x in range(profile.m):
        s = sum(prices[i][x] for i in range(profile.n))
        if d[x] > 0:
            columns_ok &= close(s, 1)
        else:
            columns_ok &= s <= 1
    demand_ok = True
    for i in range(profile.n):
        c = profile.contributions[i]
        if c == 0:
            continue
        cost = sum(prices[i][x] * profile.values[i][x] for x in profile.approvals[i])
        # Leontief demand: buy v_i in proportion, as many units as the budget allows.
        best = c / cost if cost > 0 else math.inf
        demand_ok &= close(best, leontief_utility(profile, i, d))
    return LindahlPrices(prices, bool(budgets_ok), bool(columns_ok), bool(demand_ok))


def _supported_on_critical(profile, d, rows, exact):
    tau = 0.0 if exact else TAU_CRIT
    for i in range(profile.n):
        T = critical_set(profile, i, d, tau if not exact else TAU_CRIT)
        for x in range(profile.m):
            if x not in T and rows[i][x] > (0 if exact else 1e-9 * float(profile.endowment)):
                return False
    return True


# ---------------------------------------------------------------- brute force

_MAX_POINTS = 2_000_000


def _compositions(total: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    rows = np.zeros((1, 0), dtype=np.int64)
    left = np.array([total], dtype=np.int64)
    for _ in range(parts - 1):
        counts = left + 1
        rep = np.repeat(np.arange(len(rows)), counts)
        starts = np.cumsum(counts) - counts
        k = np.arange(counts.sum()) - np.repeat(starts, counts)
        rows = np.column_stack([rows[rep], k])
        left = left[rep] - k
    return np.column_stack([rows, left])


def _count(total, parts):
    return math.comb(total + parts - 1, parts - 1)


class _Welfare:
    def __init__(self, profile: Profile):
        self.C = np.array([float(c) for c in profile.contributions])
        self.V = np.array([[float(v) for v in row] for row in profile.values])
        self.active = self.C > 0

    def __call__(self, P: np.ndarray) -> np.ndarray:
        """Nash welfare of every row of ``P`` (points x charities)."""
        total = np.zeros(len(P))
        with np.errstate(divide="ignore", invalid="ignore"):
            for c, v in zip(self.C[self.active], self.V[self.active]):
                mask = v > 0
                u = np.min(P[:, mask] / v[mask], axis=1)
                total += c * np.log(u)
        total[np.isnan(total)] = -np.inf
        return total


def _polish(profile: Profile, start: np.ndarray) -> np.ndarray:
    """Local maximisation of Nash welfare from ``start`` in epigraph form.

    Variables ``(d, u)``: maximise ``sum C_i log u_i`` subject to ``u_i v_ix <= d_x`` and
    ``sum d = C_N``.  The objective is smooth there, so SLSQP follows the ridges that the
    ``min`` in the Leontief utility puts in the way of a grid walk.
    """
    from scipy.optimize import minimize

    C = np.array([float(c) for c in profile.contributions])
    V = np.array([[float(v) for v in row] for row in profile.values])
    active = np.flatnonzero(C > 0)
    m, k = profile.m, len(active)
    total = C.sum()
    w = C[active] / total
    with np.errstate(divide="ignore"):
        u0 = np.array([np.min(start[V[i] > 0] / V[i][V[i] > 0]) for i in active])
    floor = 1e-9 * total
    z0 = np.concatenate([start, np.maximum(u0, floor)])
    pairs = [(a, x) for a, i in enumerate(active) for x in range(m) if V[i, x] > 0]
    A = np.zeros((len(pairs), m + k))
    for r, (a, x) in enumerate(pairs):
        A[r, x] = 1.0
        A[r, m + a] = -V[active[a], x]
    cons = [
        {"type": "eq", "fun": lambda z: z[:m].sum() - total, "jac": lambda z: np.r_[np.ones(m), np.zeros(k)]},
        {"type": "ineq", "fun": lambda z: A @ z, "jac": lambda z: A},
    ]

    def f(z):
        return -float(w @ np.log(z[m:]))

    def df(z):
        return np.r_[np.zeros(m), -w / z[m:]]

    bounds = [(0.0, total)] * m + [(floor, total)] * k
    res = minimize(f, z0, jac=df, bounds=bounds, constraints=cons, method="SLSQP", options={"ftol": 1e-15, "maxiter": 1000})
    d = np.clip(res.x[:m], 0.0, None)
    return d * (total / d.sum())


def brute_force_nash(profile: Profile, resolution: int, refine: bool = True) -> tuple:
    """Grid maximiser of Nash welfare at step ``C_N / resolution``, then locally polished.

    The grid is exhaustive when it has at most two million points; otherwise the
    finest coarser grid under that size is searched.  With ``refine`` the best grid
    point seeds :func:`_polish`, whose answer is kept only if it scores higher.
    Used only as a test oracle; ``m <= 4`` keeps it fast.
    """
    m = profile.m
    total = float(profile.endowment)
    if m == 1:
        return (total,)
    f = _Welfare(profile)
    coarse = resolution
    while _count(coarse, m) > _MAX_POINTS:
        coarse //= 2
    grid = _compositions(coarse, m) * (total / coarse)
    vals = f(grid)
    best = grid[int(np.argmax(vals))]
    if refine:
        polished = _polish(profile, best)
        if f(polished[None, :])[0] >= f(best[None, :])[0]:
            best = polished
    return tuple(float(a) for a in best)

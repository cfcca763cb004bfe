"""Equilibrium computation for general valuations.

The float solvers stop on the equilibrium residual (largest displacement per unit of
endowment) rather than on a welfare gap, because displacement is exactly what a best
response would move and vanishes only at the equilibrium.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Optional

from . import dynamics, kernels
from .exact import charity_egalitarian, snap_to_rational
from .model import TAU_CRIT, EquilibriumResult, Profile, cobb_douglas_log_utility, nash_welfare, utilities

METHODS = ("dynamics", "subgradient", "auto", "exact-binary")


@dataclass(frozen=True)
class SolveConfig:
    tol: float = 1e-10
    max_iter: int = 1_000_000
    method: str = "auto"
    seed: int = 0
    tau: float = TAU_CRIT
    subgradient_iters: int = 2000
    step: float = 0.2

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


def _float_values(profile):
    return [[float(v) for v in row] for row in profile.values]


def _polish(sub: Profile, rows, cfg: SolveConfig, budget: int):
    values = _float_values(sub)
    tol = cfg.tol * float(sub.endowment)
    out, t, res = kernels.redistribute(values, sub.contributions, rows, list(range(sub.n)), budget, tol)
    if not math.isfinite(res):
        res = max(kernels.displacements(values, sub.contributions, out))
    return out, t, res


def _float_result(profile, red, rows_sub, method, iterations, res, cfg, start, extra=None) -> EquilibriumResult:
    rows = red.expand_rows([tuple(float(a) for a in r) for r in rows_sub])
    dist = tuple(sum(col) for col in zip(*rows))
    C = float(profile.endowment)
    return EquilibriumResult(
        distribution=dist,
        decomposition=rows,
        utilities=utilities(profile, dist),
        nash_welfare=nash_welfare(profile, dist),
        residual=res / C,
        exact=False,
        method=method,
        iterations=iterations,
        converged=res <= cfg.tol * C,
        wall_time=time.perf_counter() - start,
        extra=dict(extra or {}),
    )


def _solve_dynamics(profile, red, cfg, start):
    sub = red.sub
    rows0 = [[float(a) for a in r] for r in dynamics.proportional_rows(sub)]
    rows, t, res = _polish(sub, rows0, cfg, cfg.max_iter)
    return _float_result(profile, red, rows, "dynamics", t, res, cfg, start)


def _project_simplex(y, total):
    """Euclidean projection of ``y`` onto ``{z >= 0, sum z = total}``."""
    u = sorted(y, reverse=True)
    acc = 0.0
    theta = 0.0
    for k, a in enumerate(u, 1):
        acc += a
        t = (acc - total) / k
        if a - t > 0:
            theta = t
    return [max(0.0, a - theta) for a in y]


def _subgradient_point(sub: Profile, cfg: SolveConfig):
    """Projected subgradient ascent on Nash welfare over the scaled simplex."""
    v = _float_values(sub)
    C = [float(c) for c in sub.contributions]
    total = sum(C)
    m = sub.m
    d = [0.0] * m
    for row, c in zip(dynamics.proportional_rows(sub), C):
        for x in range(m):
            d[x] += float(row[x])
    best, best_val = list(d), nash_welfare(sub, d)
    step0 = cfg.step * total
    for t in range(1, cfg.subgradient_iters + 1):
        g = [0.0] * m
        for i in range(sub.n):
            ratios = [(d[x] / v[i][x], x) for x in range(m) if v[i][x] > 0]
            u = min(r for r, _ in ratios)
            T = [x for r, x in ratios if r <= u * (1 + cfg.tau)]
            if u <= 0:
                for x in T:
                    g[x] += C[i] / len(T)
                continue
            for x in T:
                g[x] += C[i] / (len(T) * d[x])
        norm = math.sqrt(sum(a * a for a in g)) or 1.0
        h = step0 / math.sqrt(t)
        d = _project_simplex([a + h * b / norm for a, b in zip(d, g)], total)
        val = nash_welfare(sub, d)
        if val > best_val:
            best, best_val = list(d), val
    return best, cfg.subgradient_iters


def _rows_near(sub: Profile, d, tau=1e-3):
    """A warm-start decomposition: each charity's amount is shared by the agents nearly critical on it."""
    v = _float_values(sub)
    C = [float(c) for c in sub.contributions]
    n, m = sub.n, sub.m
    crit = []
    for i in range(n):
        ratios = {x: d[x] / v[i][x] for x in range(m) if v[i][x] > 0}
        u = min(ratios.values())
        crit.append([x for x, r in ratios.items() if r <= u * (1 + tau) + 1e-300])
    rows = [[0.0] * m for _ in range(n)]
    for x in range(m):
        who = [i for i in range(n) if x in crit[i]]
        w = sum(C[i] for i in who)
        for i in who:
            rows[i][x] = d[x] * C[i] / w
    for i in range(n):
        s = sum(rows[i])
        if s > 0:
            rows[i] = [a * C[i] / s for a in rows[i]]
        else:
            rows[i] = [C[i] / len(crit[i]) if x in crit[i] else 0.0 for x in range(m)]
    return rows


def _solve_subgradient(profile, red, cfg, start):
    sub = red.sub
    d, iters = _subgradient_point(sub, cfg)
    rows, t, res = _polish(sub, _rows_near(sub, d), cfg, cfg.max_iter)
    return _float_result(profile, red, rows, "subgradient", iters + t, res, cfg, start, {"polish_rounds": t})


def solve_equilibrium(profile: Profile, cfg: Optional[SolveConfig] = None) -> EquilibriumResult:
    """The unique equilibrium distribution of ``profile``.

    ``dynamics`` runs round-robin best responses from the proportional split;
    ``subgradient`` ascends Nash welfare and polishes with dynamics; ``auto`` runs
    dynamics and then tries to snap to an exactly verified rational equilibrium;
    ``exact-binary`` uses the charity-egalitarian leximin program (binary weights only).
    Unconverged runs return the last iterate with ``converged=False``.
    """
    cfg = cfg or SolveConfig()
    start = time.perf_counter()
    if profile.endowment <= 0:
        raise ValueError("total contribution must be positive")
    if cfg.method == "exact-binary":
        res = charity_egalitarian(profile, strict=True)
        return replace(res, method="exact-binary", wall_time=time.perf_counter() - start)
    red = profile.reduce()
    if cfg.method == "subgradient":
        return _solve_subgradient(profile, red, cfg, start)
    res = _solve_dynamics(profile, red, cfg, start)
    if cfg.method == "dynamics":
        return res
    snapped = snap_to_rational(profile, res.distribution, cfg.tau)
    if snapped is None:
        extra = dict(res.extra, snap="failed")
        return replace(res, method="auto", extra=extra, wall_time=time.perf_counter() - start)
    extra = dict(snapped.extra, float_residual=res.residual)
    return replace(
        snapped,
        method="auto",
        iterations=res.iterations,
        extra=extra,
        wall_time=time.perf_counter() - start,
    )


def solve_cobb_douglas_equilibrium(profile: Profile, cfg: Optional[SolveConfig] = None) -> EquilibriumResult:
    """Equilibrium for log-form Cobb-Douglas utilities, which coincides with the Leontief one.

    Delegates to :func:`solve_equilibrium`, then checks every agent's row against a
    Cobb-Douglas best response and reports the log-utilities.
    """
    res = solve_equilibrium(profile, cfg)
    rows = res.decomposition
    totals = dynamics.column_totals(rows)
    worst = 0.0
    for i in range(profile.n):
        if profile.contributions[i] == 0:
            continue
        ext = [float(t) - float(r) for t, r in zip(totals, rows[i])]
        br = dynamics.cd_best_response(profile, i, ext)
        worst = max(worst, dynamics.shift([float(a) for a in rows[i]], br))
    cd = tuple(cobb_douglas_log_utility(profile, i, res.distribution) for i in range(profile.n))
    extra = dict(res.extra, cd_log_utilities=cd, cd_residual=worst / float(profile.endowment))
    return replace(res, extra=extra)

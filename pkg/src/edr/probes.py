"""Randomised falsification probes for the incentive, monotonicity, welfare and dynamics laws.

Every trial draws its own generator from ``SeedSequence(seed, spawn_key=(k,))``, so a
report is reproducible from its seed and any single trial can be replayed alone.  Each
trial reports a *margin*: how far it stayed from violating the law under test, in
units of the endowment (or relative utility).  Positive margins are safe.

Comparisons are exact when both solves produced verified rational equilibria;
otherwise a slack of ``1e-7 * C_N`` money units (divided by the agent's smallest
positive valuation for utilities) separates real violations from float noise, and
trials landing inside that slack are counted as near misses.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional

import mpmath
import numpy as np

from . import dynamics
from .model import Profile, WelfareSpec, g_welfare, is_exact, leontief_utility
from .solver import SolveConfig, solve_equilibrium

FLOAT_MARGIN = 1e-7
PROPERTIES = ("gsp", "pref-mono", "contrib-mono", "gwelfare", "dynamics-potential")


@dataclass
class TrialOutcome:
    violation: bool = False
    near_miss: bool = False
    margin: float = math.inf
    exact: bool = True
    checks: Dict[str, int] = field(default_factory=dict)
    detail: Optional[dict] = None


@dataclass
class ProbeReport:
    property: str
    seed: int
    trials: int = 0
    violations: int = 0
    near_misses: int = 0
    exact_trials: int = 0
    worst_margin: float = math.inf
    checks: Dict[str, int] = field(default_factory=dict)
    failures: List[dict] = field(default_factory=list)
    expected_counterexample: bool = False
    notes: Dict[str, object] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.violations == 0 or self.expected_counterexample

    def add(self, k: int, out: TrialOutcome) -> None:
        self.trials += 1
        self.violations += out.violation
        self.near_misses += out.near_miss
        self.exact_trials += out.exact
        self.worst_margin = min(self.worst_margin, out.margin)
        for name, c in out.checks.items():
            self.checks[name] = self.checks.get(name, 0) + c
        if out.violation:
            self.failures.append({"trial": k, "seed": self.seed, **(out.detail or {})})

    def merge(self, other: "ProbeReport") -> "ProbeReport":
        if other.property != self.property or other.seed != self.seed:
            raise ValueError("can only merge reports of the same property and seed")
        out = ProbeReport(self.property, self.seed)
        out.trials = self.trials + other.trials
        out.violations = self.violations + other.violations
        out.near_misses = self.near_misses + other.near_misses
        out.exact_trials = self.exact_trials + other.exact_trials
        out.worst_margin = min(self.worst_margin, other.worst_margin)
        out.checks = dict(self.checks)
        for k, c in other.checks.items():
            out.checks[k] = out.checks.get(k, 0) + c
        out.failures = sorted(self.failures + other.failures, key=lambda f: f["trial"])
        out.expected_counterexample = self.expected_counterexample or other.expected_counterexample
        out.notes = {**self.notes, **other.notes}
        return out

    def to_dict(self) -> dict:
        return {
            "property": self.property,
            "seed": self.seed,
            "trials": self.trials,
            "violations": self.violations,
            "near_misses": self.near_misses,
            "exact_trials": self.exact_trials,
            "worst_margin": None if math.isinf(self.worst_margin) else repr(float(self.worst_margin)),
            "checks": dict(sorted(self.checks.items())),
            "failures": self.failures,
            "expected_counterexample": self.expected_counterexample,
            "notes": {k: _jsonable(v) for k, v in sorted(self.notes.items())},
        }


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(a) for a in v]
    if isinstance(v, dict):
        return {k: _jsonable(a) for k, a in v.items()}
    return v


def trial_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))


# ----------------------------------------------------------------- instances


def random_subset(rng, m: int) -> list:
    S = [x for x in range(m) if rng.random() < 0.5]
    return S or [int(rng.integers(m))]


def random_profile(rng, n: int, m: int, binary: bool = False, zero_prob: float = 0.0, max_c: int = 100) -> Profile:
    """Random approval sets (each charity with probability 1/2), integer weights 1..10 (or 1),
    integer contributions 1..``max_c``; each contribution is zero with probability ``zero_prob``."""
    values = []
    for _ in range(n):
        S = set(random_subset(rng, m))
        values.append([(1 if binary else int(rng.integers(1, 11))) if x in S else 0 for x in range(m)])
    C = [0 if rng.random() < zero_prob else int(rng.integers(1, max_c + 1)) for _ in range(n)]
    if not any(C):
        C[int(rng.integers(n))] = int(rng.integers(1, max_c + 1))
    return Profile.from_matrix(values, C)


def _log_uniform(rng, lo=0.1, hi=10.0) -> Fraction:
    return Fraction(math.exp(rng.uniform(math.log(lo), math.log(hi)))).limit_denominator(1000)


def misreport_row(rng, row, binary: bool) -> list:
    """Perturb positive values log-uniformly in [1/10, 10]; with probability 1/2 redraw the approval set."""
    m = len(row)
    support = [x for x in range(m) if row[x] > 0]
    if rng.random() < 0.5:
        support = random_subset(rng, m)
    out = []
    for x in range(m):
        if x not in support:
            out.append(Fraction(0))
        elif binary:
            out.append(Fraction(1))
        else:
            base = row[x] if row[x] > 0 else Fraction(int(rng.integers(1, 11)))
            out.append(max(Fraction(1, 1000), base * _log_uniform(rng)))
    return out


# ------------------------------------------------------------------- solving

_CFG = SolveConfig(method="auto")


def equilibrium(profile: Profile):
    """``(distribution, exact)`` for the probes."""
    res = solve_equilibrium(profile, _CFG)
    return res.distribution, res.exact


def _money_margin(*profiles) -> float:
    return FLOAT_MARGIN * max(float(p.endowment) for p in profiles)


def _utility_margin(profile: Profile, i: int, money: float) -> float:
    return money / min(float(v) for v in profile.values[i] if v > 0)


def _u(profile, i, d):
    return leontief_utility(profile, i, d)


def _rel(a, scale):
    return float(a) / float(scale) if scale else float(a)


# ------------------------------------------------------------------- probes


def gsp_trial(base: Optional[Profile], n: int, m: int, seed: int, k: int) -> TrialOutcome:
    rng = trial_rng(seed, k)
    P = base if base is not None else random_profile(rng, n, m)
    n = P.n
    binary = P.is_binary
    size = int(rng.integers(1, n + 1))
    G = sorted(int(a) for a in rng.choice(n, size=size, replace=False))
    Q = P
    for i in G:
        Q = Q.with_values(i, misreport_row(rng, P.values[i], binary))
        if rng.random() < 0.5:
            c = P.contributions[i]
            Q = Q.with_contribution(i, Fraction(int(rng.integers(0, int(c) + 1))) if c >= 1 else c * Fraction(int(rng.integers(0, 11)), 10))
    if Q.endowment == 0:
        Q = Q.with_contribution(G[0], P.contributions[G[0]])
    d, ex1 = equilibrium(P)
    d2, ex2 = equilibrium(Q)
    exact = ex1 and ex2
    money = 0.0 if exact else _money_margin(P, Q)
    gains = [_u(P, i, d2) - _u(P, i, d) for i in G]
    tols = [_utility_margin(P, i, money) for i in G]
    strict = any(g > t for g, t in zip(gains, tols))
    weak = all(g >= -t for g, t in zip(gains, tols))
    violation = strict and weak
    near = not violation and weak and any(g > 0 for g in gains)
    out = TrialOutcome(exact=exact, checks={"gsp": 1})
    if any(g > 0 for g in gains):
        out.margin = max(_rel(-g, _u(P, i, d) or 1) for g, i in zip(gains, G))
    detail = {}
    if violation:
        detail["gsp"] = {"coalition": G, "gains": [str(g) for g in gains]}

    # Participation: one agent adds Z to her contribution.
    j = int(rng.integers(n))
    Z = Fraction(int(rng.integers(1, 101)))
    R = P.with_contribution(j, P.contributions[j] + Z)
    d3, ex3 = equilibrium(R)
    C = P.endowment
    bound = (C + Z) / C
    uj, uj2 = _u(P, j, d), _u(P, j, d3)
    ex = ex1 and ex3
    tol = 0.0 if ex else _utility_margin(P, j, _money_margin(P, R)) * float(bound)
    slack = uj2 - bound * uj if ex else float(uj2) - float(bound) * float(uj)
    out.checks["participation"] = 1
    out.exact = out.exact and ex
    if slack < -tol:
        violation = True
        detail["participation"] = {"agent": j, "Z": str(Z), "ratio_bound": str(bound), "slack": str(slack)}
    elif slack < 0:
        near = True
    out.margin = min(out.margin, _rel(slack, uj or 1))
    out.violation, out.near_miss = violation, near and not violation
    if violation:
        out.detail = {"profile": _profile_doc(P), **detail}
    return out


def mono_trial(kind: str, base: Optional[Profile], n: int, m: int, seed: int, k: int) -> TrialOutcome:
    rng = trial_rng(seed, k)
    P = base if base is not None else random_profile(rng, n, m, zero_prob=0.15 if kind == "contribution" else 0.0)
    n, m = P.n, P.m
    i = int(rng.integers(n))
    if kind == "preference":
        x = int(rng.integers(m))
        row = list(P.values[i])
        if row[x] > 0:
            row[x] = row[x] * _log_uniform(rng, 1.0, 10.0) if rng.random() < 0.9 else row[x] + 1
            if row[x] <= P.values[i][x]:
                row[x] = P.values[i][x] + Fraction(1, 100)
        else:
            row[x] = Fraction(int(rng.integers(1, 11)))
        Q = P.with_values(i, row)
    else:
        Q = P.with_contribution(i, P.contributions[i] + Fraction(int(rng.integers(0, 101))))
    if P.endowment == 0:
        return TrialOutcome(checks={"skipped": 1})
    d, ex1 = equilibrium(P)
    d2, ex2 = equilibrium(Q)
    exact = ex1 and ex2
    money = 0.0 if exact else _money_margin(P, Q)
    C = float(max(P.endowment, Q.endowment))
    out = TrialOutcome(exact=exact, checks={})
    detail = {}
    slacks = []
    targets = [x] if kind == "preference" else range(m)
    worst = min((d2[y] - d[y]) for y in targets)
    out.checks["amount"] = 1
    if worst < -money:
        detail["amount"] = str(worst)
    slacks.append((worst, money, C))
    if kind == "preference":
        # Equilibrium Nash welfare and the raising agent's utility cannot go up.
        nw_old, nw_true, nw_new = _nash_precise(P, d), _nash_precise(P, d2), _nash_precise(Q, d2)
        nw_tol = 0.0 if exact else 1e-6 * float(P.endowment)
        nw_tol = max(nw_tol, 1e-25 * (1 + abs(float(nw_old))))
        for name, val in (("nash_true", nw_true), ("nash_reported", nw_new)):
            s = float(nw_old - val)
            out.checks[name] = 1
            if s < -nw_tol:
                detail[name] = repr(s)
            slacks.append((s, nw_tol, float(P.endowment)))
        u_old = _u(P, i, d)
        tol_u = _utility_margin(P, i, money)
        for name, val in (("utility_true", _u(P, i, d2)), ("utility_reported", _u(Q, i, d2))):
            s = u_old - val
            out.checks[name] = 1
            if s < -tol_u:
                detail[name] = str(s)
            slacks.append((s, tol_u, u_old or 1))
    out.violation = bool(detail)
    out.near_miss = not out.violation and any(s < 0 for s, _, _ in slacks)
    out.margin = min(_rel(s, sc) for s, _, sc in slacks)
    if out.violation:
        out.detail = {"profile": _profile_doc(P), "agent": i, "modified": _profile_doc(Q), **detail}
    return out


def _nash_precise(profile: Profile, d):
    with mpmath.workdps(60):
        total = mpmath.mpf(0)
        for i, c in enumerate(profile.contributions):
            if c == 0:
                continue
            u = leontief_utility(profile, i, d)
            if u <= 0:
                return mpmath.mpf("-inf")
            u = mpmath.mpf(u.numerator) / u.denominator if isinstance(u, Fraction) else mpmath.mpf(u)
            total += (mpmath.mpf(c.numerator) / c.denominator) * mpmath.log(u)
        return total


# ----------------------------------------------------------- g-welfare


def pinned_c1(p) -> Fraction:
    """First agent's contribution in the pinned counterexample: ``max((2^(p-1) p)^(-1/p), 2)``."""
    val = (2 ** (float(p) - 1) * float(p)) ** (-1 / float(p))
    return Fraction(max(val, 2.0)).limit_denominator(10**6)


def pinned_counterexample(p) -> dict:
    """For ``g(u) = u^p`` with ``p > 0``: agents with ``C = (C_1, 1)``, approvals ``{a}`` and ``{a, b}``.

    The equilibrium is ``(C_1, 1)``; the decomposable ``(C_1 + 1, 0)`` has higher g-welfare.
    """
    c1 = pinned_c1(p)
    prof = Profile.from_matrix([[1, 0], [1, 1]], [c1, 1], charities=("a", "b"))
    w = WelfareSpec.power(p)
    eq = (c1, Fraction(1))
    alt = (c1 + 1, Fraction(0))
    w_eq, w_alt = g_welfare(prof, eq, w), g_welfare(prof, alt, w)
    return {
        "p": p,
        "C1": c1,
        "profile": prof,
        "equilibrium": eq,
        "alternative": alt,
        "welfare_equilibrium": w_eq,
        "welfare_alternative": w_alt,
        "is_equilibrium": solve_equilibrium(prof, _CFG).distribution == eq,
        "reproduced": bool(w_alt > w_eq),
    }


def random_decomposable(rng, profile: Profile, eq_rows=None) -> tuple:
    """Random rows on each agent's approvals (exact), optionally mixed toward ``eq_rows``."""
    rows = []
    for i in range(profile.n):
        c = profile.contributions[i]
        A = profile.approvals[i]
        w = {x: int(rng.integers(0, 1001)) for x in A}
        if not any(w.values()):
            w[A[0]] = 1
        s = sum(w.values())
        rows.append([c * w.get(x, 0) / s for x in range(profile.m)])
    if eq_rows is not None:
        eps = Fraction(1, 10 ** int(rng.integers(1, 7)))
        rows = [[(1 - eps) * a + eps * b for a, b in zip(er, r)] for er, r in zip(eq_rows, rows)]
    return dynamics.column_totals(rows)


def _welfare_precise(profile, d, w: WelfareSpec):
    if w.tag == "nash":
        return _nash_precise(profile, d)
    val = g_welfare(profile, d, w)
    return val if isinstance(val, (int, Fraction)) else mpmath.mpf(val)


def _sub(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a - b
    with mpmath.workdps(60):
        return _to_mpf(a) - _to_mpf(b)


def _to_mpf(a):
    if isinstance(a, Fraction):
        return mpmath.mpf(a.numerator) / a.denominator
    return mpmath.mpf(a)


def gwelfare_trial(base: Profile, w: WelfareSpec, samples: int, seed: int, k: int, eq=None) -> TrialOutcome:
    """One batch of ``samples`` decomposable points checked against the equilibrium's g-welfare."""
    rng = trial_rng(seed, k)
    P = base
    if eq is None:
        res = solve_equilibrium(P, _CFG)
        eq = (res.distribution, res.decomposition, res.exact)
    d, rows, exact = eq
    W = _welfare_precise(P, d, w)
    out = TrialOutcome(exact=exact, checks={"samples": samples})
    scale = float(abs(W)) + 1.0
    worst = math.inf
    bad = None
    for s in range(samples):
        local = rows if (rows and is_exact(rows[0]) and s % 2 == 1) else None
        dd = random_decomposable(rng, P, local)
        val = _welfare_precise(P, dd, w)
        slack = _sub(W, val)
        rel = float(slack) / scale
        worst = min(worst, rel)
        tol = 0.0 if exact and isinstance(slack, Fraction) else 1e-12 * scale if exact else 1e-7 * scale
        if slack < -tol and bad is None:
            bad = {"sample": [str(a) for a in dd], "slack": repr(float(slack))}
    out.margin = worst
    if bad is not None:
        out.violation = True
        out.detail = {"profile": _profile_doc(P), **bad}
    return out


# ------------------------------------------------------- dynamics potential


def potential_trial(base: Optional[Profile], n: int, m: int, seed: int, k: int, rounds_per_agent: int = 6) -> TrialOutcome:
    """Exact trace: strict potential increase, window bound and the displacement triangle inequality."""
    rng = trial_rng(seed, k)
    P = base if base is not None else random_profile(rng, n, m, max_c=20)
    n = P.n
    K = int(rng.integers(n, 2 * n + 1))
    seq = dynamics.SequenceSpec.random_with_bound(K, seed=int(rng.integers(2**31)))
    initial = "proportional" if k % 2 == 0 else "empty"
    rounds = rounds_per_agent * n + K + 1
    tr = dynamics.run_redistribution(P, seq, rounds=rounds, initial=initial, arithmetic="exact")
    steps = tr.steps
    C = P.endowment
    out = TrialOutcome(exact=True, checks={})
    detail = {}
    # States from which every agent has acted at least once (immediately for full starts).
    acted = set()
    first_full = 0 if initial == "proportional" else None
    for s in steps[1:]:
        acted.add(s.agent)
        if first_full is None and len(acted) == n:
            first_full = s.round
    margins = []
    if first_full is None:
        return TrialOutcome(checks={"skipped": 1})
    for t in range(first_full, len(steps) - 1):
        a, b = steps[t], steps[t + 1]
        if b.shifted > 0:
            gain = dynamics.potential_gain(P, a.rows, b.rows)
            out.checks["potential"] = out.checks.get("potential", 0) + 1
            if gain <= 0:
                detail.setdefault("potential", []).append(b.round)
            margins.append(float(gain) / float(C))
        bound = dynamics.potential_bound(P, b.rows)
        out.checks["upper_bound"] = out.checks.get("upper_bound", 0) + 1
        if float(b.potential) > bound + 1e-9 * (1 + abs(bound)):
            detail.setdefault("upper_bound", []).append(b.round)
        for j in range(n):
            slack = b.shifted + b.displacements[j] - a.displacements[j]
            out.checks["triangle"] = out.checks.get("triangle", 0) + 1
            if slack < 0:
                detail.setdefault("triangle", []).append([b.round, j])
            margins.append(float(slack) / float(C))
        if t + K + 1 < len(steps):
            window = sum((steps[l].shifted for l in range(t + 1, t + K + 2)), Fraction(0))
            slack = window - max(a.displacements)
            out.checks["window"] = out.checks.get("window", 0) + 1
            if slack < 0:
                detail.setdefault("window", []).append(t)
            margins.append(float(slack) / float(C))
    out.margin = min(margins) if margins else math.inf
    if detail:
        out.violation = True
        out.detail = {"profile": _profile_doc(P), "K": K, "initial": initial, "sequence": tr.sequence(), **detail}
    return out


# ----------------------------------------------------------------- driver


def _profile_doc(p: Profile) -> dict:
    from .io import profile_to_dict

    return profile_to_dict(p)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("EDR_THREADS", "1")))
    except ValueError:
        return 1


def _run(name: str, fn: Callable[[int], TrialOutcome], trials: int, seed: int, threads: Optional[int] = None) -> ProbeReport:
    threads = threads or _threads()
    report = ProbeReport(name, seed)
    if threads > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for k, out in enumerate(pool.map(fn, range(trials), chunksize=max(1, trials // (4 * threads)))):
                report.add(k, out)
    else:
        for k in range(trials):
            report.add(k, fn(k))
    return report


class _Call:
    """Picklable trial closure for the process pool."""

    def __init__(self, fn, *args, **kwargs):
        self.fn, self.args, self.kwargs = fn, args, kwargs

    def __call__(self, k):
        return self.fn(*self.args, k, **self.kwargs)


def probe_group_strategyproofness(profile: Optional[Profile] = None, trials: int = 1000, seed: int = 0, n: int = 4, m: int = 5, threads=None) -> ProbeReport:
    """Random coalitions misreport valuations and lower contributions; no member may gain
    unless another loses.  Also checks the participation bound ``u_j'/u_j >= (C_N + Z)/C_N``."""
    return _run("gsp", _Call(gsp_trial, profile, n, m, seed), trials, seed, threads)


def probe_monotonicity(profile: Optional[Profile] = None, kind: str = "preference", trials: int = 1000, seed: int = 0, n: int = 4, m: int = 5, threads=None) -> ProbeReport:
    if kind not in ("preference", "contribution"):
        raise ValueError("kind must be 'preference' or 'contribution'")
    name = "pref-mono" if kind == "preference" else "contrib-mono"
    return _run(name, _Call(mono_trial, kind, profile, n, m, seed), trials, seed, threads)


def probe_gwelfare_decomposable(profile: Profile, w: WelfareSpec, samples: int = 10_000, seed: int = 0, batch: int = 500, threads=None) -> ProbeReport:
    """Equilibrium g-welfare against random decomposable distributions, plus the pinned
    counterexample when ``g`` is a positive power."""
    if w.tag == "custom":
        raise ValueError("custom g is not supported by this probe")
    if not profile.is_binary:
        raise ValueError("the g-welfare probe needs binary valuations")
    if w.tag == "power" and w.p > 0:
        pass  # violations are expected: x g'(x) is increasing
    elif not w.x_dg_nonincreasing():
        raise ValueError("g must have x g'(x) non-increasing")
    res = solve_equilibrium(profile, _CFG)
    eq = (res.distribution, res.decomposition, res.exact)
    batches = [min(batch, samples - s) for s in range(0, samples, batch)]
    report = ProbeReport("gwelfare", seed)
    for k, size in enumerate(batches):
        report.add(k, gwelfare_trial(profile, w, size, seed, k, eq))
    report.notes["samples"] = samples
    report.notes["welfare"] = w.tag if w.tag == "nash" else f"power({w.p})"
    if w.tag == "power" and w.p > 0:
        ce = pinned_counterexample(w.p)
        report.expected_counterexample = ce["reproduced"] and ce["is_equilibrium"]
        report.notes["pinned"] = {
            "C1": str(ce["C1"]),
            "equilibrium": [str(a) for a in ce["equilibrium"]],
            "alternative": [str(a) for a in ce["alternative"]],
            "welfare_equilibrium": _jsonable(ce["welfare_equilibrium"]),
            "welfare_alternative": _jsonable(ce["welfare_alternative"]),
            "is_equilibrium": ce["is_equilibrium"],
            "reproduced": ce["reproduced"],
        }
    return report


def probe_dynamics_potential(profile: Optional[Profile] = None, trials: int = 100, seed: int = 0, n: int = 3, m: int = 4, threads=None) -> ProbeReport:
    return _run("dynamics-potential", _Call(potential_trial, profile, n, m, seed), trials, seed, threads)

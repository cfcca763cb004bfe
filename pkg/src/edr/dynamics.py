"""Best responses, the redistribution and spending processes, and their diagnostics.

A *state* is a tuple of per-agent rows (one amount per charity).  Rows are exact
whenever the profile and the starting state are exact, so potential increases
and displacement identities can be asserted without tolerances.
"""

from __future__ import annotations

import csv
import io
import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, TextIO

import mpmath

from . import kernels
from .model import Profile, is_exact

#: Above this many rounds, ``arithmetic="auto"`` switches to floats.
EXACT_ROUND_LIMIT = 2000

DEFAULT_RESIDUAL = 1e-12
DEFAULT_MAX_ROUNDS = 100_000


def water_fill(external: Sequence, weights: Sequence, budget) -> tuple:
    """Unique spend maximising ``min_x (external[x] + s[x]) / weights[x]`` over positive weights.

    Generic over the number type, so Fractions in give Fractions out.
    """
    m = len(weights)
    idx = sorted((x for x in range(m) if weights[x] > 0), key=lambda x: (external[x] / weights[x], x))
    zero = budget * 0
    spend = [zero] * m
    if not idx:
        return tuple(spend)
    W = zero
    E = zero
    level = zero
    for pos, x in enumerate(idx):
        W += weights[x]
        E += external[x]
        level = (budget + E) / W
        if pos + 1 == len(idx):
            break
        nxt = idx[pos + 1]
        if level <= external[nxt] / weights[nxt]:
            break
    for x in idx:
        s = level * weights[x] - external[x]
        if s > 0:
            spend[x] = s
    return tuple(spend)


def best_response(profile: Profile, i: int, external: Sequence, budget=None) -> tuple:
    """Agent ``i``'s unique utility-maximising spend of ``budget`` (default ``C_i``) given others' funding."""
    if budget is None:
        budget = profile.contributions[i]
    if is_exact(external) and is_exact([budget]):
        return water_fill(tuple(external), profile.values[i], Fraction(budget))
    weights = [float(v) for v in profile.values[i]]
    return tuple(kernels.water_fill([float(e) for e in external], weights, float(budget)))


def cd_best_response(profile: Profile, i: int, external: Sequence, budget=None, tol: float = 1e-13) -> tuple:
    """Best response for the log-form Cobb-Douglas utility, by bisection on the KKT multiplier.

    Stationarity gives ``e(x) + s(x) = v_x / lam`` on charities that receive money,
    so the spend is monotone in ``1/lam``; bisect until the budget is met.
    """
    if budget is None:
        budget = profile.contributions[i]
    budget = float(budget)
    v = [float(a) for a in profile.values[i]]
    e = [float(a) for a in external]
    support = [x for x in range(len(v)) if v[x] > 0]
    if budget <= 0:
        return tuple(0.0 for _ in v)

    def spent(inv_lam):
        return sum(max(0.0, v[x] * inv_lam - e[x]) for x in support)

    lo, hi = 0.0, 1.0
    while spent(hi) < budget:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if spent(mid) < budget:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    inv_lam = 0.5 * (lo + hi)
    out = [0.0] * len(v)
    for x in support:
        out[x] = max(0.0, v[x] * inv_lam - e[x])
    s = sum(out)
    if s > 0:
        out = [a * budget / s for a in out]
    return tuple(out)


def column_totals(rows: Sequence[Sequence]) -> tuple:
    return tuple(sum(col) for col in zip(*rows))


def shift(a: Sequence, b: Sequence):
    """Half the L1 distance: the amount moved when replacing row ``a`` by ``b``."""
    total = sum(abs(p - q) for p, q in zip(a, b))
    return total / 2 if isinstance(total, (int, Fraction)) else 0.5 * total


def _external(rows, totals, i):
    return tuple(t - r for t, r in zip(totals, rows[i]))


def displacement(profile: Profile, i: int, rows: Sequence[Sequence]):
    """``d_i``: what agent ``i`` would shift if she best-responded now."""
    totals = column_totals(rows)
    br = best_response(profile, i, _external(rows, totals, i))
    return shift(rows[i], br)


def displacements(profile: Profile, rows: Sequence[Sequence]) -> tuple:
    totals = column_totals(rows)
    return tuple(shift(rows[i], best_response(profile, i, _external(rows, totals, i))) for i in range(profile.n))


def residual(profile: Profile, rows: Sequence[Sequence]):
    """Largest displacement per unit of endowment."""
    d = max(displacements(profile, rows))
    C = profile.endowment
    return d / C if isinstance(d, (int, Fraction)) else d / float(C)


def _check_support(profile, rows):
    for i, row in enumerate(rows):
        vals = profile.values[i]
        for x, a in enumerate(row):
            if a > 0 and vals[x] == 0:
                raise ValueError(f"agent {i} funds charity {x}, which she does not value")


def potential(profile: Profile, rows: Sequence[Sequence], dps: Optional[int] = None):
    """``sum_i sum_x row_i(x) log(v_ix / total(x))``; mpmath at ``dps`` digits when given."""
    _check_support(profile, rows)
    totals = column_totals(rows)
    if dps is None:
        acc = 0.0
        for i, row in enumerate(rows):
            for x, a in enumerate(row):
                if a > 0:
                    acc += float(a) * math.log(float(profile.values[i][x]) / float(totals[x]))
        return acc
    with mpmath.workdps(dps):
        acc = mpmath.mpf(0)
        for i, row in enumerate(rows):
            for x, a in enumerate(row):
                if a > 0:
                    acc += _mpf(a) * mpmath.log(_mpf(profile.values[i][x]) / _mpf(totals[x]))
        return acc


def _mpf(a):
    if isinstance(a, Fraction):
        return mpmath.mpf(a.numerator) / a.denominator
    return mpmath.mpf(a)


def potential_bound(profile: Profile, rows: Sequence[Sequence]) -> float:
    """Upper bound ``sum_i sum_x row_i(x) log v_ix + m/e``."""
    acc = sum(
        float(a) * math.log(float(profile.values[i][x])) for i, row in enumerate(rows) for x, a in enumerate(row) if a > 0
    )
    return acc + profile.m / math.e


def potential_gain(profile: Profile, before, after, max_dps: int = 4000):
    """``Phi(after) - Phi(before)`` at a precision high enough to trust its sign.

    Returns an ``mpmath.mpf``; zero means the difference stayed below the working
    precision all the way to ``max_dps`` digits.
    """
    dps = 40
    while True:
        with mpmath.workdps(dps):
            a = potential(profile, after, dps)
            b = potential(profile, before, dps)
            diff = a - b
            scale = abs(a) + abs(b) + 1
            if abs(diff) > scale * mpmath.mpf(10) ** (-(dps - 8)):
                return +diff
        if dps >= max_dps:
            return mpmath.mpf(0)
        dps *= 2


def proportional_rows(profile: Profile) -> tuple:
    """Each agent spreads her contribution proportionally to her valuations."""
    out = []
    for row, c in zip(profile.values, profile.contributions):
        s = sum(row)
        out.append(tuple(c * v / s for v in row))
    return tuple(out)


def empty_rows(profile: Profile) -> tuple:
    return tuple(tuple(Fraction(0) for _ in range(profile.m)) for _ in range(profile.n))


@dataclass(frozen=True)
class SequenceSpec:
    """Which agent acts in each round.

    ``round_robin`` cycles through all agents; ``random`` draws agents so that nobody
    waits more than ``bound`` rounds; ``explicit`` repeats ``agents`` (0-based) periodically.
    """

    kind: str = "round_robin"
    bound: Optional[int] = None
    agents: tuple = ()
    seed: int = 0

    @classmethod
    def round_robin(cls) -> "SequenceSpec":
        return cls("round_robin")

    @classmethod
    def random_with_bound(cls, K: int, seed: int = 0) -> "SequenceSpec":
        return cls("random", bound=K, seed=seed)

    @classmethod
    def explicit(cls, agents: Sequence[int], bound: Optional[int] = None) -> "SequenceSpec":
        return cls("explicit", bound=bound, agents=tuple(agents))

    def validate(self, n: int) -> None:
        if self.kind == "round_robin":
            return
        if self.kind == "random":
            if self.bound is None or self.bound < n:
                raise ValueError(f"random sequences need a bound K >= n = {n}")
            return
        if self.kind != "explicit":
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if not self.agents:
            raise ValueError("explicit sequence is empty")
        if any(not 0 <= a < n for a in self.agents):
            raise ValueError(f"explicit sequence names an agent outside 0..{n - 1}")
        if len(set(self.agents)) != n:
            raise ValueError("explicit sequence must give every agent a turn")
        if self.bound is not None and self.max_wait(n) > self.bound:
            raise ValueError(f"explicit sequence makes some agent wait longer than K = {self.bound}")

    def max_wait(self, n: int) -> float:
        """Longest gap between consecutive turns of an agent in the periodic sequence."""
        seq = self.agents
        L = len(seq)
        worst = 0
        for a in range(n):
            pos = [k for k, b in enumerate(seq) if b == a]
            if not pos:
                return math.inf
            gaps = [pos[0] + L - pos[-1]] + [q - p for p, q in zip(pos, pos[1:])]
            worst = max(worst, max(gaps), pos[0] + 1)
        return worst

    def period(self, n: int) -> Optional[tuple]:
        if self.kind == "round_robin":
            return tuple(range(n))
        if self.kind == "explicit":
            return self.agents
        return None

    def iterate(self, n: int) -> Iterator[int]:
        self.validate(n)
        per = self.period(n)
        if per is not None:
            t = 0
            while True:
                yield per[t % len(per)]
                t += 1
        yield from self._random(n)

    def _random(self, n: int) -> Iterator[int]:
        # Each agent must act again within ``K`` rounds of her last turn, the
        # first turn included.  A random pick is kept only if the remaining
        # deadlines stay schedulable; otherwise the earliest deadline acts.
        K = self.bound
        rng = random.Random(self.seed)
        deadline = [K - 1] * n
        t = 0
        while True:
            pick = rng.randrange(n)
            trial = list(deadline)
            trial[pick] = t + K
            if not _schedulable(trial, t + 1):
                pick = min(range(n), key=lambda a: (deadline[a], a))
            deadline[pick] = t + K
            yield pick
            t += 1


def _schedulable(deadlines, start):
    return all(d >= start + k for k, d in enumerate(sorted(deadlines)))


@dataclass(frozen=True)
class TraceStep:
    round: int
    agent: Optional[int]
    played: tuple
    rows: tuple
    distribution: tuple
    potential: float
    shifted: object
    displacements: tuple
    residual: object


@dataclass
class DynamicsTrace:
    """Per-round record of a dynamics run; ``steps[0]`` is the starting state."""

    profile: Profile
    process: str
    steps: List[TraceStep] = field(default_factory=list)
    exact: bool = True
    converged: bool = False
    rounds: int = 0
    final_rows: tuple = ()
    normalized: Optional[tuple] = None

    @property
    def distributions(self) -> list:
        return [s.distribution for s in self.steps]

    @property
    def final_distribution(self) -> tuple:
        if self.normalized is not None:
            return self.normalized
        return column_totals(self.final_rows)

    def sequence(self) -> list:
        return [s.agent for s in self.steps[1:]]

    def write_csv(self, out: TextIO, charities: Optional[Sequence[str]] = None, decimals: Optional[int] = None) -> None:
        """One row per round: round, agent, shifted, potential, residual, then one column per charity."""
        charities = list(charities or self.profile.charities)
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["round", "agent", "shifted", "potential", "residual", *charities])
        for s in self.steps:
            if s.round == 0:
                continue
            agent = self.profile.agents[s.agent].name if s.agent is not None else ""
            w.writerow(
                [s.round, agent, _fmt(s.shifted, decimals), repr(float(s.potential)), _fmt(s.residual, decimals)]
                + [_fmt(a, decimals) for a in s.distribution]
            )

    def to_csv(self, decimals: Optional[int] = None) -> str:
        buf = io.StringIO()
        self.write_csv(buf, decimals=decimals)
        return buf.getvalue()


def _fmt(a, decimals=None) -> str:
    if isinstance(a, Fraction):
        if decimals is not None:
            return f"{float(a):.{decimals}f}"
        return str(a.numerator) if a.denominator == 1 else f"{a.numerator}/{a.denominator}"
    if isinstance(a, int):
        return str(a)
    if decimals is not None:
        return f"{float(a):.{decimals}f}"
    return repr(float(a))


def _use_exact(profile: Profile, arithmetic: str, rounds: Optional[int], start_rows) -> bool:
    if arithmetic == "exact":
        if start_rows is not None and not all(is_exact(r) for r in start_rows):
            raise ValueError("exact arithmetic needs an exact starting state")
        return True
    if arithmetic == "float":
        return False
    if arithmetic != "auto":
        raise ValueError(f"unknown arithmetic {arithmetic!r}")
    if start_rows is not None and not all(is_exact(r) for r in start_rows):
        return False
    return rounds is not None and rounds <= EXACT_ROUND_LIMIT


def _start_rows(profile, initial):
    if initial is None or initial == "empty":
        return empty_rows(profile)
    if initial == "proportional":
        return proportional_rows(profile)
    rows = tuple(tuple(r) for r in initial)
    if len(rows) != profile.n or any(len(r) != profile.m for r in rows):
        raise ValueError("initial rows must be n x m")
    return rows


def _norm(d, C):
    return d / C if isinstance(d, (int, Fraction)) else d / float(C)


def run_redistribution(
    profile: Profile,
    seq: Optional[SequenceSpec] = None,
    rounds: Optional[int] = None,
    eps: Optional[float] = None,
    initial="empty",
    arithmetic: str = "auto",
    record: bool = True,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> DynamicsTrace:
    """Run the redistribution process: each round one agent replaces her row by a best response.

    Stops after ``rounds`` rounds if given; otherwise once the residual (largest
    displacement over the endowment) is at most ``eps`` (default ``1e-12``) or after
    ``max_rounds`` rounds.  With ``rounds`` and ``eps`` both given, whichever comes first.
    ``initial`` is ``"empty"`` (nobody has given yet), ``"proportional"`` or explicit rows.
    """
    seq = seq or SequenceSpec.round_robin()
    seq.validate(profile.n)
    given = None if isinstance(initial, str) or initial is None else initial
    exact = _use_exact(profile, arithmetic, rounds, given)
    rows = _start_rows(profile, initial)
    if not exact:
        rows = tuple(tuple(float(a) for a in r) for r in rows)
    if rounds is None and eps is None:
        eps = DEFAULT_RESIDUAL
    limit = rounds if rounds is not None else max_rounds
    C = profile.endowment
    trace = DynamicsTrace(profile, "redistribute", exact=exact)

    if not exact and not record and seq.period(profile.n) is not None:
        return _fast_redistribution(profile, seq, rows, limit, eps, trace)

    def snapshot(t, agent, played, shifted):
        disp = displacements(profile, rows)
        dist = column_totals(rows)
        trace.steps.append(
            TraceStep(t, agent, played, rows, dist, potential(profile, rows), shifted, disp, _norm(max(disp), C))
        )
        return trace.steps[-1].residual

    res = snapshot(0, None, (), 0) if record else None
    agents = seq.iterate(profile.n)
    t = 0
    converged = False
    while t < limit:
        if eps is not None and res is not None and res <= eps and t > 0:
            converged = True
            break
        i = next(agents)
        totals = column_totals(rows)
        br = best_response(profile, i, _external(rows, totals, i))
        moved = shift(rows[i], br)
        rows = rows[:i] + (br,) + rows[i + 1 :]
        t += 1
        if record:
            res = snapshot(t, i, br, moved)
        elif eps is not None and t % profile.n == 0:
            res = residual(profile, rows)
    if not converged and eps is not None:
        res = trace.steps[-1].residual if record else residual(profile, rows)
        converged = res <= eps
    trace.converged = converged or (eps is None)
    trace.rounds = t
    trace.final_rows = rows
    return trace


def _fast_redistribution(profile, seq, rows, limit, eps, trace):
    values = [[float(v) for v in row] for row in profile.values]
    tol = (eps if eps is not None else 0.0) * float(profile.endowment)
    order = seq.period(profile.n)
    if eps is None:
        tol = -1.0  # never stop early
    out, t, res = kernels.redistribute(values, profile.contributions, [list(r) for r in rows], order, limit, tol)
    trace.final_rows = tuple(tuple(r) for r in out)
    trace.rounds = t
    trace.converged = eps is None or res <= tol
    return trace


@dataclass
class SpendingState:
    """Cumulative per-agent spending plus the window of recent individual donations."""

    cumulative: list
    counts: list
    window: deque

    def normalized(self) -> tuple:
        m = len(self.cumulative[0])
        zero = self.cumulative[0][0] * 0
        out = [zero] * m
        for row, k in zip(self.cumulative, self.counts):
            if k:
                for x in range(m):
                    out[x] += row[x] / k
        return tuple(out)


def run_spending(
    profile: Profile,
    rounds: int,
    order: Optional[Sequence[int]] = None,
    window: Optional[int] = None,
    experimental_window: bool = False,
    arithmetic: str = "auto",
    record: bool = True,
) -> DynamicsTrace:
    """Round-robin spending: each turn the acting agent donates a fresh ``C_i`` best-responding
    to the last ``window`` donations (default ``n - 1``).

    ``trace.normalized`` is the sum over agents of cumulative spending divided by the
    number of donations each made.  Trace rows report, for the last ``n`` donations viewed
    as a decomposition, the potential and residual; ``shifted`` is how much the acting
    agent changed relative to her previous donation.
    """
    n = profile.n
    if rounds < 0:
        raise ValueError("rounds must be nonnegative")
    if window is None:
        window = n - 1
    if window != n - 1 and not experimental_window:
        raise ValueError("windows other than n - 1 need experimental_window=True")
    if window < 0:
        raise ValueError("window must be nonnegative")
    order = tuple(order) if order is not None else tuple(range(n))
    if sorted(set(order)) != list(range(n)) or len(order) != n:
        raise ValueError("spending order must list every agent exactly once")
    exact = _use_exact(profile, arithmetic, rounds, None)
    trace = DynamicsTrace(profile, "spend", exact=exact, rounds=rounds)
    C = profile.endowment

    if not exact and not record:
        values = [[float(v) for v in row] for row in profile.values]
        cum, counts = kernels.spend(values, profile.contributions, order, rounds, window)
        state = SpendingState(cum, counts, deque())
        trace.final_rows = tuple(tuple(r) for r in cum)
        trace.normalized = state.normalized() if rounds else tuple(0.0 for _ in range(profile.m))
        trace.converged = True
        return trace

    zero = Fraction(0) if exact else 0.0
    state = SpendingState([[zero] * profile.m for _ in range(n)], [0] * n, deque(maxlen=max(window, 1)))
    last = [None] * n
    recent = {}
    for t in range(rounds):
        i = order[t % n]
        ext = [zero] * profile.m
        if window > 0:
            for donation in state.window:
                for x in range(profile.m):
                    ext[x] += donation[x]
        br = best_response(profile, i, ext)
        if window > 0:
            state.window.append(br)
        cum = state.cumulative[i]
        for x in range(profile.m):
            cum[x] += br[x]
        state.counts[i] += 1
        moved = shift(last[i], br) if last[i] is not None else sum(br)
        last[i] = br
        recent[i] = br
        if record:
            if len(recent) == n:
                rows = tuple(recent[a] for a in range(n))
                disp = displacements(profile, rows)
                pot, res = potential(profile, rows), _norm(max(disp), C)
            else:
                rows, disp, pot, res = (), (), math.nan, math.nan
            trace.steps.append(TraceStep(t + 1, i, br, rows, state.normalized(), pot, moved, disp, res))
    trace.final_rows = tuple(tuple(r) for r in state.cumulative)
    trace.normalized = state.normalized() if rounds else tuple(zero for _ in range(profile.m))
    trace.converged = True
    return trace

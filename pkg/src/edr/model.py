"""Domain types and the utility, welfare and criticality functions shared by every solver.

Numbers are either exact (``int``/``Fraction``) or binary64 floats.  A function
computes exactly whenever every operand it touches is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, total_ordering
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

Number = Union[int, Fraction, float]

#: Relative tolerance for tie detection when a distribution is in float mode.
TAU_CRIT = 1e-9


def is_exact(values: Iterable) -> bool:
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in values)


def as_fraction(value) -> Fraction:
    """Parse ``"900"``, ``"316.5"``, ``"950/3"``, ints, Fractions and floats into a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, (int, float)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational number")


@dataclass(frozen=True)
class AgentSpec:
    name: str
    contribution: Fraction
    values: Mapping[str, Fraction]

    def value(self, charity: str) -> Fraction:
        return self.values.get(charity, Fraction(0))


@dataclass(frozen=True)
class Profile:
    """Contributions and valuations of ``n`` agents over ``m`` charities."""

    charities: tuple
    agents: tuple

    def __post_init__(self):
        if not self.charities:
            raise ValueError("a profile needs at least one charity")
        if not self.agents:
            raise ValueError("a profile needs at least one agent")
        if len(set(self.charities)) != len(self.charities):
            raise ValueError("duplicate charity names")
        if len({a.name for a in self.agents}) != len(self.agents):
            raise ValueError("duplicate agent names")
        known = set(self.charities)
        for a in self.agents:
            if a.contribution < 0:
                raise ValueError(f"agent {a.name!r} has a negative contribution")
            unknown = set(a.values) - known
            if unknown:
                raise ValueError(f"agent {a.name!r} values unknown charities {sorted(unknown)}")
            if any(v < 0 for v in a.values.values()):
                raise ValueError(f"agent {a.name!r} has a negative valuation")
            if not any(v > 0 for v in a.values.values()):
                raise ValueError(f"agent {a.name!r} values no charity positively")

    @classmethod
    def from_matrix(
        cls,
        values: Sequence[Sequence],
        contributions: Sequence,
        charities: Optional[Sequence[str]] = None,
        names: Optional[Sequence[str]] = None,
    ) -> "Profile":
        n, m = len(values), len(values[0]) if values else 0
        charities = tuple(charities) if charities is not None else tuple(f"c{x + 1}" for x in range(m))
        names = tuple(names) if names is not None else tuple(f"agent{i + 1}" for i in range(n))
        if len(contributions) != n or any(len(row) != m for row in values):
            raise ValueError("values must be n x m and contributions length n")
        agents = tuple(
            AgentSpec(
                names[i],
                as_fraction(contributions[i]),
                {charities[x]: as_fraction(values[i][x]) for x in range(m) if as_fraction(values[i][x]) != 0},
            )
            for i in range(n)
        )
        return cls(charities, agents)

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def m(self) -> int:
        return len(self.charities)

    @cached_property
    def values(self) -> tuple:
        """Valuation matrix as a tuple of per-agent tuples of Fractions."""
        return tuple(tuple(a.value(c) for c in self.charities) for a in self.agents)

    @cached_property
    def contributions(self) -> tuple:
        return tuple(a.contribution for a in self.agents)

    @cached_property
    def endowment(self) -> Fraction:
        return sum(self.contributions, Fraction(0))

    @cached_property
    def approvals(self) -> tuple:
        """Per agent, the indices of charities with positive value (``A_i``)."""
        return tuple(tuple(x for x in range(self.m) if row[x] > 0) for row in self.values)

    @property
    def is_binary(self) -> bool:
        return all(v in (0, 1) for row in self.values for v in row)

    def charity_index(self, name: str) -> int:
        return self.charities.index(name)

    def with_contribution(self, i: int, amount) -> "Profile":
        agents = list(self.agents)
        a = agents[i]
        agents[i] = AgentSpec(a.name, as_fraction(amount), dict(a.values))
        return Profile(self.charities, tuple(agents))

    def with_values(self, i: int, row: Sequence) -> "Profile":
        agents = list(self.agents)
        a = agents[i]
        vals = {c: as_fraction(v) for c, v in zip(self.charities, row) if as_fraction(v) != 0}
        agents[i] = AgentSpec(a.name, a.contribution, vals)
        return Profile(self.charities, tuple(agents))

    def scaled_contributions(self, factor) -> "Profile":
        factor = as_fraction(factor)
        return Profile(
            self.charities,
            tuple(AgentSpec(a.name, a.contribution * factor, dict(a.values)) for a in self.agents),
        )

    def reduce(self) -> "Reduction":
        """Drop zero-contribution agents and charities no contributing agent values."""
        active = [i for i, c in enumerate(self.contributions) if c > 0]
        if not active:
            raise ValueError("total contribution is zero")
        funded = sorted({x for i in active for x in self.approvals[i]})
        sub = Profile(
            tuple(self.charities[x] for x in funded),
            tuple(
                AgentSpec(
                    self.agents[i].name,
                    self.agents[i].contribution,
                    {c: v for c, v in self.agents[i].values.items() if v > 0},
                )
                for i in active
            ),
        )
        return Reduction(self, sub, tuple(active), tuple(funded))


@dataclass(frozen=True)
class Reduction:
    """A solvable sub-profile plus the index maps needed to re-expand its results."""

    full: Profile
    sub: Profile
    agent_map: tuple
    charity_map: tuple

    def expand_distribution(self, amounts: Sequence) -> tuple:
        zero = _zero_like(amounts)
        out = [zero] * self.full.m
        for k, x in enumerate(self.charity_map):
            out[x] = amounts[k]
        return tuple(out)

    def expand_rows(self, rows: Sequence[Sequence]) -> tuple:
        zero = _zero_like(rows[0]) if rows else Fraction(0)
        out = [tuple([zero] * self.full.m) for _ in range(self.full.n)]
        for k, i in enumerate(self.agent_map):
            out[i] = self.expand_distribution(rows[k])
        return tuple(out)

    def restrict_distribution(self, amounts: Sequence) -> tuple:
        return tuple(amounts[x] for x in self.charity_map)


def _zero_like(seq) -> Number:
    return 0.0 if seq and not is_exact(seq) else Fraction(0)


@dataclass(frozen=True)
class Distribution:
    amounts: tuple
    exact: bool = True

    @classmethod
    def of(cls, amounts: Sequence) -> "Distribution":
        amounts = tuple(amounts)
        return cls(amounts, is_exact(amounts))

    def __len__(self):
        return len(self.amounts)

    def __getitem__(self, x):
        return self.amounts[x]

    def __iter__(self):
        return iter(self.amounts)

    @property
    def total(self):
        return sum(self.amounts)

    def support(self) -> tuple:
        return tuple(x for x, a in enumerate(self.amounts) if a > 0)


@dataclass(frozen=True)
class Decomposition:
    rows: tuple

    def column_sums(self) -> tuple:
        return tuple(sum(col) for col in zip(*self.rows))

    def row_sums(self) -> tuple:
        return tuple(sum(r) for r in self.rows)

    def is_consistent(self, profile: Profile, d: Sequence, tol: float = 0.0) -> bool:
        """Column sums reproduce ``d`` and row sums reproduce the contributions."""
        if any(a < -tol for r in self.rows for a in r):
            return False
        if tol == 0:
            return self.column_sums() == tuple(d) and self.row_sums() == profile.contributions
        scale = float(profile.endowment) or 1.0
        ok_cols = all(abs(float(a) - float(b)) <= tol * scale for a, b in zip(self.column_sums(), d))
        ok_rows = all(abs(float(a) - float(b)) <= tol * scale for a, b in zip(self.row_sums(), profile.contributions))
        return ok_cols and ok_rows


@dataclass(frozen=True)
class EquilibriumResult:
    distribution: tuple
    decomposition: tuple
    utilities: tuple
    nash_welfare: float
    residual: Number
    exact: bool
    method: str = ""
    iterations: int = 0
    converged: bool = True
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def mode(self) -> str:
        return "exact" if self.exact else "float"


def _amounts(d) -> Sequence:
    return d.amounts if isinstance(d, Distribution) else d


def leontief_utility(profile: Profile, i: int, d) -> Number:
    """``min`` over approved charities of funding divided by valuation."""
    d = _amounts(d)
    row = profile.values[i]
    return min(d[x] / row[x] for x in profile.approvals[i])


def cobb_douglas_log_utility(profile: Profile, i: int, d) -> float:
    d = _amounts(d)
    row = profile.values[i]
    total = 0.0
    for x in profile.approvals[i]:
        if d[x] <= 0:
            return -math.inf
        total += float(row[x]) * math.log(d[x])
    return total


def critical_set(profile: Profile, i: int, d, tol: float = TAU_CRIT) -> frozenset:
    """Charities attaining agent ``i``'s utility; ties use relative ``tol`` unless ``d`` is exact."""
    d = _amounts(d)
    row = profile.values[i]
    ratios = {x: d[x] / row[x] for x in profile.approvals[i]}
    u = min(ratios.values())
    if is_exact(d):
        return frozenset(x for x, r in ratios.items() if r == u)
    bound = u * (1 + tol)
    return frozenset(x for x, r in ratios.items() if r <= bound)


def utilities(profile: Profile, d) -> tuple:
    return tuple(leontief_utility(profile, i, d) for i in range(profile.n))


def nash_welfare(profile: Profile, d) -> float:
    """Contribution-weighted log utility, with ``0 * log 0 = 0``."""
    total = 0.0
    for i, c in enumerate(profile.contributions):
        if c == 0:
            continue
        u = leontief_utility(profile, i, d)
        if u <= 0:
            return -math.inf
        total += float(c) * math.log(u)
    return total


@dataclass(frozen=True)
class WelfareSpec:
    """``g`` in ``sum_i C_i g(u_i)``: ``nash`` (log), ``power`` (``sgn(p) u^p``) or ``custom``."""

    tag: str = "nash"
    p: Optional[float] = None
    g: Optional[Callable[[float], float]] = None
    dg: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.tag == "power":
            if self.p is None or self.p == 0:
                raise ValueError("power welfare needs a nonzero exponent")
        elif self.tag == "custom":
            if self.g is None:
                raise ValueError("custom welfare needs g")
        elif self.tag != "nash":
            raise ValueError(f"unknown welfare tag {self.tag!r}")

    @classmethod
    def nash(cls) -> "WelfareSpec":
        return cls("nash")

    @classmethod
    def power(cls, p) -> "WelfareSpec":
        return cls("power", p=p)

    def __call__(self, u: Number) -> Number:
        if self.tag == "nash":
            return math.log(u) if u > 0 else -math.inf
        if self.tag == "power":
            p = self.p
            if u == 0:
                return -math.inf if p < 0 else 0
            if isinstance(p, int) or (isinstance(p, Fraction) and p.denominator == 1):
                val = Fraction(u) ** int(p) if is_exact([u]) else float(u) ** int(p)
            else:
                val = float(u) ** float(p)
            return val if p > 0 else -val
        return self.g(u)

    def x_dg_nonincreasing(self) -> bool:
        """Whether ``x g'(x)`` is non-increasing (log and negative powers qualify)."""
        if self.tag == "nash":
            return True
        if self.tag == "power":
            return self.p < 0
        return False


def g_welfare(profile: Profile, d, w: WelfareSpec) -> Number:
    total: Number = 0
    for i, c in enumerate(profile.contributions):
        if c == 0:
            continue
        g = w(leontief_utility(profile, i, d))
        if g == -math.inf:
            return -math.inf
        total += c * g if isinstance(g, (int, Fraction)) else float(c) * g
    return total


@total_ordering
@dataclass(frozen=True)
class LeximinKey:
    """Values sorted ascending; tuple order on these keys is the leximin order."""

    values: tuple

    @classmethod
    def of(cls, values: Iterable) -> "LeximinKey":
        return cls(tuple(sorted(values)))

    def _check(self, other):
        if not isinstance(other, LeximinKey):
            return NotImplemented
        if len(self.values) != len(other.values):
            raise ValueError("leximin comparison needs equal lengths")
        return None

    def __lt__(self, other):
        bad = self._check(other)
        if bad is NotImplemented:
            return bad
        return self.values < other.values


def leximin_compare(a, b) -> int:
    """``1`` if ``a`` is leximin-higher, ``-1`` if lower, ``0`` for equal multisets."""
    ka = a if isinstance(a, LeximinKey) else LeximinKey.of(a)
    kb = b if isinstance(b, LeximinKey) else LeximinKey.of(b)
    if len(ka.values) != len(kb.values):
        raise ValueError("leximin comparison needs equal lengths")
    if ka.values == kb.values:
        return 0
    return 1 if ka.values > kb.values else -1

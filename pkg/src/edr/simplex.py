"""Dense two-phase tableau simplex over exact rationals with Bland's anti-cycling rule.

Arithmetic runs on ``gmpy2.mpq`` when available and falls back to
``fractions.Fraction``; inputs and outputs are always Fractions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

try:
    from gmpy2 import mpq as _Q

    def _to_q(v) -> "_Q":
        v = Fraction(v)
        return _Q(v.numerator, v.denominator)

    def _to_fraction(q) -> Fraction:
        return Fraction(int(q.numerator), int(q.denominator))

except ImportError:  # pragma: no cover - exercised only without gmpy2
    _Q = Fraction

    def _to_q(v) -> Fraction:
        return Fraction(v)

    def _to_fraction(q) -> Fraction:
        return q


SENSES = ("<=", ">=", "==")


@dataclass
class LinearProgram:
    """``maximize objective . x`` subject to linear rows, ``0 <= x <= upper``.

    Rows are ``(coeffs, sense, rhs)`` with ``coeffs`` a sparse ``{var: coef}`` map.
    """

    num_vars: int
    constraints: List[Tuple[Dict[int, Fraction], str, Fraction]] = field(default_factory=list)
    objective: Dict[int, Fraction] = field(default_factory=dict)
    upper: Dict[int, Fraction] = field(default_factory=dict)

    def add_var(self) -> int:
        self.num_vars += 1
        return self.num_vars - 1

    def add_constraint(self, coeffs: Dict[int, object], sense: str, rhs) -> int:
        if sense not in SENSES:
            raise ValueError(f"unknown constraint sense {sense!r}")
        clean = {}
        for j, a in coeffs.items():
            if not 0 <= j < self.num_vars:
                raise ValueError(f"variable index {j} out of range for {self.num_vars} variables")
            a = Fraction(a)
            if a:
                clean[j] = clean.get(j, Fraction(0)) + a
        self.constraints.append((clean, sense, Fraction(rhs)))
        return len(self.constraints) - 1

    def copy(self) -> "LinearProgram":
        return LinearProgram(
            self.num_vars,
            [(dict(c), s, r) for c, s, r in self.constraints],
            dict(self.objective),
            dict(self.upper),
        )

    def check(self) -> None:
        for j in list(self.objective) + list(self.upper):
            if not 0 <= j < self.num_vars:
                raise ValueError(f"variable index {j} out of range for {self.num_vars} variables")
        for coeffs, sense, _ in self.constraints:
            if sense not in SENSES:
                raise ValueError(f"unknown constraint sense {sense!r}")
            for j in coeffs:
                if not 0 <= j < self.num_vars:
                    raise ValueError(f"variable index {j} out of range for {self.num_vars} variables")


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: Optional[tuple] = None
    value: Optional[Fraction] = None
    duals: Optional[tuple] = None
    farkas: Optional[tuple] = None
    ray: Optional[tuple] = None
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    def __init__(self, rows, rhs, basis, ncols):
        self.T = rows  # list of lists, last entry is the rhs
        self.basis = basis
        self.ncols = ncols
        self.pivots = 0

    def pivot(self, r: int, j: int, obj: list) -> None:
        T = self.T
        prow = T[r]
        inv = 1 / prow[j]
        nz = []
        for idx, val in enumerate(prow):
            if val:
                val = val * inv
                prow[idx] = val
                nz.append((idx, val))
        for k, row in enumerate(T):
            if k != r:
                f = row[j]
                if f:
                    for idx, val in nz:
                        row[idx] -= f * val
        f = obj[j]
        if f:
            for idx, val in nz:
                obj[idx] -= f * val
        self.basis[r] = j
        self.pivots += 1

    def reduced_costs(self, cost: list) -> list:
        """Row ``c - c_B B^-1 [A | b]``; the last entry is ``-c_B B^-1 b``."""
        obj = list(cost) + [_Q(0)]
        for r, b in enumerate(self.basis):
            cb = cost[b]
            if cb:
                for idx, val in enumerate(self.T[r]):
                    if val:
                        obj[idx] -= cb * val
        return obj

    def run(self, obj: list, allowed) -> Tuple[str, Optional[int]]:
        """Bland's rule on a maximisation with reduced-cost row ``obj``."""
        T = self.T
        while True:
            entering = next((j for j in allowed if obj[j] > 0), None)
            if entering is None:
                return "optimal", None
            best = None
            for r, row in enumerate(T):
                a = row[entering]
                if a > 0:
                    ratio = row[-1] / a
                    key = (ratio, self.basis[r])
                    if best is None or key < best[0]:
                        best = (key, r)
            if best is None:
                return "unbounded", entering
            self.pivot(best[1], entering, obj)


def simplex_solve(lp: LinearProgram) -> LPResult:
    """Solve ``lp`` exactly; returns optimum with duals, or a certificate of failure.

    For ``infeasible`` results ``farkas`` holds multipliers ``w`` (one per row,
    upper-bound rows last) with ``sum_r w_r a_r <= 0`` componentwise, ``w . b > 0``,
    ``w_r <= 0`` on ``<=`` rows and ``w_r >= 0`` on ``>=`` rows.  For ``unbounded``
    results ``ray`` is an improving direction of the structural variables.
    """
    lp.check()
    rows: List[Tuple[Dict[int, Fraction], str, Fraction]] = list(lp.constraints)
    for j, ub in sorted(lp.upper.items()):
        rows.append(({j: Fraction(1)}, "<=", Fraction(ub)))

    nv = lp.num_vars
    m = len(rows)
    signs = []
    senses = []
    for coeffs, sense, rhs in rows:
        s = -1 if rhs < 0 else 1
        if s < 0:
            sense = {"<=": ">=", ">=": "<=", "==": "=="}[sense]
        signs.append(s)
        senses.append(sense)

    n_slack = sum(1 for s in senses if s != "==")
    n_art = sum(1 for s in senses if s != "<=")
    ncols = nv + n_slack + n_art
    art_start = nv + n_slack
    T = []
    basis = []
    id_col = []
    slack_j = nv
    art_j = art_start
    zero = _Q(0)
    one = _Q(1)
    for r, (coeffs, _, rhs) in enumerate(rows):
        row = [zero] * (ncols + 1)
        s = signs[r]
        for j, a in coeffs.items():
            row[j] = _to_q(a * s)
        row[-1] = _to_q(rhs * s)
        sense = senses[r]
        if sense == "<=":
            row[slack_j] = one
            basis.append(slack_j)
            id_col.append(slack_j)
            slack_j += 1
        else:
            if sense == ">=":
                row[slack_j] = -one
                slack_j += 1
            row[art_j] = one
            basis.append(art_j)
            id_col.append(art_j)
            art_j += 1
        T.append(row)

    tab = _Tableau(T, None, basis, ncols)

    # Phase 1: maximise -sum(artificials).
    cost1 = [zero] * ncols
    for j in range(art_start, ncols):
        cost1[j] = -one
    if n_art:
        obj = tab.reduced_costs(cost1)
        tab.run(obj, range(ncols))
        infeasibility = sum((T[r][-1] for r in range(m) if basis[r] >= art_start), zero)
        if infeasibility > 0:
            # y = c_B B^-1 for the minimisation of sum(artificials).
            y = []
            for k in range(m):
                col = id_col[k]
                val = zero
                for r, b in enumerate(basis):
                    if b >= art_start:
                        val += T[r][col]
                y.append(_to_fraction(val) * signs[k])
            return LPResult("infeasible", farkas=tuple(y), pivots=tab.pivots)
        # Drive remaining zero-level artificials out of the basis where possible.
        for r in range(m):
            if basis[r] >= art_start:
                j = next((j for j in range(art_start) if T[r][j] != 0), None)
                if j is not None:
                    tab.pivot(r, j, [zero] * (ncols + 1))

    cost2 = [zero] * ncols
    for j, c in lp.objective.items():
        cost2[j] = _to_q(c)
    obj = tab.reduced_costs(cost2)
    status, entering = tab.run(obj, range(art_start))
    if status == "unbounded":
        ray = [Fraction(0)] * nv
        if entering < nv:
            ray[entering] = Fraction(1)
        for r, b in enumerate(basis):
            if b < nv:
                ray[b] = -_to_fraction(T[r][entering])
        return LPResult("unbounded", ray=tuple(ray), pivots=tab.pivots)

    x = [Fraction(0)] * nv
    for r, b in enumerate(basis):
        if b < nv:
            x[b] = _to_fraction(T[r][-1])
    duals = []
    for k in range(m):
        col = id_col[k]
        val = zero
        for r, b in enumerate(basis):
            cb = cost2[b]
            if cb:
                val += cb * T[r][col]
        duals.append(_to_fraction(val) * signs[k])
    value = sum((Fraction(c) * x[j] for j, c in lp.objective.items()), Fraction(0))
    return LPResult("optimal", x=tuple(x), value=value, duals=tuple(duals), pivots=tab.pivots)


def check_farkas(lp: LinearProgram, w: Sequence[Fraction]) -> bool:
    """Independently confirm that ``w`` certifies infeasibility of ``lp``."""
    rows = list(lp.constraints) + [({j: Fraction(1)}, "<=", Fraction(ub)) for j, ub in sorted(lp.upper.items())]
    if len(w) != len(rows):
        return False
    comb = [Fraction(0)] * lp.num_vars
    wb = Fraction(0)
    for wk, (coeffs, sense, rhs) in zip(w, rows):
        if sense == "<=" and wk > 0 or sense == ">=" and wk < 0:
            return False
        for j, a in coeffs.items():
            comb[j] += wk * a
        wb += wk * rhs
    return all(c <= 0 for c in comb) and wb > 0

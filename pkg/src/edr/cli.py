"""Command-line interface: ``edr solve | dynamics | verify | probe``.

Exit codes: 0 success, 1 malformed input or flags, 2 solver did not converge,
3 distribution refuted.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import List, Optional

from . import dynamics, io
from .analysis import is_efficient, is_equilibrium, lindahl_prices
from .model import EquilibriumResult, Profile, WelfareSpec, as_fraction
from .probes import (
    PROPERTIES,
    probe_dynamics_potential,
    probe_group_strategyproofness,
    probe_gwelfare_decomposable,
    probe_monotonicity,
    random_profile,
    trial_rng,
)
from .solver import METHODS, SolveConfig, solve_equilibrium

EXIT_OK, EXIT_INPUT, EXIT_UNCONVERGED, EXIT_REFUTED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("edr") / "fixtures" / name))


def resolve_input(path: str) -> Path:
    """``path`` itself if it exists, else a bundled fixture of the same file name."""
    p = Path(path)
    if p.exists():
        return p
    for cand in (p.name, p.name + ".json"):
        f = fixture_path(cand)
        if f.exists():
            return f
    return p


def _profile(args) -> Profile:
    return io.load_profile(resolve_input(args.input))


def _out(path: Optional[str], text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -------------------------------------------------------------------- solve


def cmd_solve(args) -> int:
    profile = _profile(args)
    try:
        tol = float(as_fraction(args.tol))
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"--tol: cannot parse {args.tol!r}")
    if args.method == "exact-binary" and not profile.is_binary:
        raise UsageError("--method exact-binary needs binary (0/1) valuations")
    cfg = SolveConfig(tol=tol, max_iter=args.max_iter, method=args.method, seed=args.seed)
    res = solve_equilibrium(profile, cfg)
    _out(args.output, io.dumps(io.result_to_dict(profile, res, args.emit_decimals)))
    if not res.converged:
        return EXIT_UNCONVERGED
    if not res.exact:
        cert = is_equilibrium(profile, res.distribution, "float", tol=max(tol, 1e-9))
        if not cert.accepted:
            return EXIT_UNCONVERGED
    return EXIT_OK


# ----------------------------------------------------------------- dynamics


def read_sequence(path: str, profile: Profile) -> List[int]:
    """Agent references (1-based indices or names) separated by whitespace or commas."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise io.FormatError(f"{path}: {exc.strerror or exc}") from None
    names = {a.name: k for k, a in enumerate(profile.agents)}
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        for tok in line.replace(",", " ").split():
            if tok in names:
                out.append(names[tok])
            elif tok.isdigit() and 1 <= int(tok) <= profile.n:
                out.append(int(tok) - 1)
            else:
                raise io.FormatError(f"{path}: line {lineno}: {tok!r} is not an agent (1..{profile.n} or a name)")
    if not out:
        raise io.FormatError(f"{path}: sequence is empty")
    return out


def _sequence(spec: str, profile: Profile, seed: int):
    if spec in ("round-robin", "rr"):
        return dynamics.SequenceSpec.round_robin()
    if spec.startswith("random:"):
        try:
            K = int(spec.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"--sequence {spec!r}: K must be an integer")
        if K < profile.n:
            raise UsageError(f"--sequence {spec!r}: K must be at least n = {profile.n}")
        return dynamics.SequenceSpec.random_with_bound(K, seed)
    if spec.startswith("file:"):
        return dynamics.SequenceSpec.explicit(read_sequence(spec.split(":", 1)[1], profile))
    raise UsageError(f"--sequence {spec!r}: use round-robin, random:K or file:PATH")


def cmd_dynamics(args) -> int:
    profile = _profile(args)
    seq = _sequence(args.sequence, profile, args.seed)
    if args.rounds is not None and args.rounds < 0:
        raise UsageError("--rounds must be nonnegative")
    if args.mode == "redistribute":
        trace = dynamics.run_redistribution(
            profile, seq, rounds=args.rounds, initial=args.initial, arithmetic=args.arithmetic
        )
        final = trace.final_distribution
        res = trace.steps[-1].residual
    else:
        if seq.kind == "random":
            raise UsageError("spending dynamics use a fixed order: round-robin or file:PATH")
        order = seq.agents if seq.kind == "explicit" else None
        window = args.experimental_window
        if window is not None:
            print(
                "note: convergence is only established for an observation window of n - 1 donations; "
                "larger windows are exploratory",
                file=sys.stderr,
            )
        rounds = args.rounds if args.rounds is not None else 100 * profile.n
        trace = dynamics.run_spending(
            profile,
            rounds,
            order=order,
            window=window,
            experimental_window=window is not None,
            arithmetic=args.arithmetic,
        )
        final = trace.final_distribution
        res = trace.steps[-1].residual if trace.steps else float("nan")
    _out(args.trace, trace.to_csv(args.emit_decimals))
    star = solve_equilibrium(profile).distribution
    dist = max(abs(float(a) - float(b)) for a, b in zip(final, star)) if trace.steps else float("nan")
    summary = (
        f"final rounds={trace.rounds} residual={_fmt(res, args.emit_decimals)} "
        f"distance_to_equilibrium={dist!r} "
        + " ".join(f"{c}={_fmt(a, args.emit_decimals)}" for c, a in zip(profile.charities, final))
    )
    print(summary, file=sys.stdout if args.trace not in (None, "-") else sys.stderr)
    return EXIT_OK


def _fmt(a, decimals):
    try:
        return io.fmt_number(a, decimals)
    except TypeError:
        return str(a)


# ------------------------------------------------------------------- verify


def cmd_verify(args) -> int:
    profile = _profile(args)
    d = io.load_distribution(resolve_input(args.distribution), profile)
    mode = args.mode
    if mode == "float":
        d = tuple(float(a) for a in d)
    try:
        cert = is_equilibrium(profile, d, mode=mode, tol=args.tol)
    except ValueError as exc:
        raise io.FormatError(str(exc)) from None
    eff = is_efficient(profile, d, mode=mode)
    names = profile.charities
    doc = {
        "certified": cert.accepted,
        "mode": "exact" if cert.exact else "float",
        "efficient": eff.efficient,
        "inefficiency_witness": None if eff.efficient else names[eff.witness],
        "critical_sets": {a.name: sorted(names[x] for x in T) for a, T in zip(profile.agents, cert.critical)},
    }
    if cert.accepted:
        rows = cert.decomposition
        doc["decomposition"] = {
            a.name: {c: io.fmt_number(v, args.emit_decimals) for c, v in zip(names, r)} for a, r in zip(profile.agents, rows)
        }
        eq = EquilibriumResult(d, rows, (), 0.0, 0, cert.exact)
        prices = lindahl_prices(profile, eq)
        doc["lindahl"] = {
            "prices": {
                a.name: {c: io.fmt_number(p, args.emit_decimals) for c, p in zip(names, r)}
                for a, r in zip(profile.agents, prices.prices)
            },
            "budgets_ok": prices.budgets_ok,
            "columns_ok": prices.columns_ok,
            "demand_ok": prices.demand_ok,
        }
    else:
        doc["refutation"] = {
            "overfunded_charities": sorted(names[x] for x in cert.hall_set) if cert.hall_set else None,
            "demand": None if cert.demand is None else io.fmt_number(cert.demand),
            "supply": None if cert.supply is None else io.fmt_number(cert.supply),
            "farkas": [io.fmt_number(w) for w in cert.farkas] if cert.farkas else None,
        }
    sys.stdout.write(io.dumps(doc))
    return EXIT_OK if cert.accepted else EXIT_REFUTED


# -------------------------------------------------------------------- probe


def _parse_nm(text: str):
    try:
        n, m = (int(a) for a in text.split(","))
    except ValueError:
        raise UsageError(f"--random {text!r}: expected n,m")
    if n < 1 or m < 1:
        raise UsageError("--random: n and m must be positive")
    return n, m


def _welfare(text: str) -> WelfareSpec:
    if text == "nash":
        return WelfareSpec.nash()
    try:
        p = as_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"--p {text!r}: expected 'nash' or a nonzero number")
    if p == 0:
        raise UsageError("--p must be nonzero")
    return WelfareSpec.power(int(p) if p.denominator == 1 else float(p))


def cmd_probe(args) -> int:
    if args.input and args.random:
        raise UsageError("give either --input or --random, not both")
    if args.trials < 0:
        raise UsageError("--trials must be nonnegative")
    n, m = _parse_nm(args.random) if args.random else (4, 5)
    profile = _profile(args) if args.input else None
    prop = args.property
    if prop == "gsp":
        rep = probe_group_strategyproofness(profile, args.trials, args.seed, n=n, m=m)
    elif prop == "pref-mono":
        rep = probe_monotonicity(profile, "preference", args.trials, args.seed, n=n, m=m)
    elif prop == "contrib-mono":
        rep = probe_monotonicity(profile, "contribution", args.trials, args.seed, n=n, m=m)
    elif prop == "dynamics-potential":
        rep = probe_dynamics_potential(profile, args.trials, args.seed, n=n, m=m)
    else:
        w = _welfare(args.p)
        if profile is None:
            profile = random_profile(trial_rng(args.seed, 2**32 - 1), n, m, binary=True)
        if not profile.is_binary:
            raise UsageError("--property gwelfare needs a binary profile")
        rep = probe_gwelfare_decomposable(profile, w, samples=args.trials, seed=args.seed)
    _out(args.report, io.dumps(rep.to_dict()))
    if args.report not in (None, "-"):
        print(
            f"{rep.property}: trials={rep.trials} violations={rep.violations} near_misses={rep.near_misses}"
            + (" expected_counterexample=true" if rep.expected_counterexample else ""),
        )
    return EXIT_OK if rep.ok else EXIT_INPUT


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="edr", description="Equilibrium distributions of charitable contributions.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="compute the equilibrium distribution")
    s.add_argument("--input", required=True, help="profile JSON (or a bundled fixture name)")
    s.add_argument("--method", choices=METHODS, default="auto")
    s.add_argument("--tol", default="1e-10", help="residual tolerance per unit of endowment")
    s.add_argument("--max-iter", type=int, default=1_000_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", help="result JSON path (default: stdout)")
    s.add_argument("--emit-decimals", type=int, metavar="D", help="render numbers with D decimals")
    s.set_defaults(func=cmd_solve)

    d = sub.add_parser("dynamics", help="simulate redistribution or spending dynamics")
    d.add_argument("--input", required=True)
    d.add_argument("--mode", choices=("redistribute", "spend"), default="redistribute")
    d.add_argument("--sequence", default="round-robin", help="round-robin | random:K | file:PATH")
    d.add_argument("--rounds", type=int)
    d.add_argument("--initial", choices=("empty", "proportional"), default="empty")
    d.add_argument("--arithmetic", choices=("auto", "exact", "float"), default="auto")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--experimental-window", type=int, metavar="W", help="spending: observe the last W donations")
    d.add_argument("--trace", help="CSV trace path (default: stdout)")
    d.add_argument("--emit-decimals", type=int, metavar="D")
    d.set_defaults(func=cmd_dynamics)

    v = sub.add_parser("verify", help="certify or refute a distribution")
    v.add_argument("--input", required=True)
    v.add_argument("--distribution", required=True, help="JSON array, object by charity, or result file")
    v.add_argument("--mode", choices=("auto", "exact", "float"), default="auto")
    v.add_argument("--tol", type=float, default=1e-9)
    v.add_argument("--emit-decimals", type=int, metavar="D")
    v.set_defaults(func=cmd_verify)

    p = sub.add_parser("probe", help="randomised property probes")
    src = p.add_argument_group("instances")
    src.add_argument("--input")
    src.add_argument("--random", metavar="N,M", help="fresh random N x M instance per trial")
    p.add_argument("--property", choices=PROPERTIES, required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", default="nash", help="gwelfare: 'nash' or the exponent of g(u) = sgn(p) u^p")
    p.add_argument("--report", help="report JSON path (default: stdout)")
    p.set_defaults(func=cmd_probe)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (ValueError, UsageError) as exc:
        print(f"edr: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

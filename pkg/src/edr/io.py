"""JSON profile, distribution and result files.  Every number travels as a string."""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

from .model import AgentSpec, EquilibriumResult, Profile, as_fraction


class FormatError(ValueError):
    """Malformed input; the message names the file, line or field at fault."""


def fmt_number(a, decimals: Optional[int] = None) -> str:
    if isinstance(a, bool):
        raise TypeError("booleans are not numbers here")
    if decimals is not None:
        if isinstance(a, float) and not math.isfinite(a):
            return repr(a)
        return f"{float(a):.{decimals}f}"
    if isinstance(a, Fraction):
        return str(a.numerator) if a.denominator == 1 else f"{a.numerator}/{a.denominator}"
    if isinstance(a, int):
        return str(a)
    return repr(float(a))


def parse_number(text: Any, where: str) -> Fraction:
    if not isinstance(text, str):
        raise FormatError(f"{where}: numbers must be strings such as \"900\", \"316.5\" or \"950/3\", got {text!r}")
    try:
        return as_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise FormatError(f"{where}: cannot parse {text!r} as a number") from None


def _load_json(path) -> Any:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def profile_from_dict(doc: Any, source: str = "<profile>") -> Profile:
    if not isinstance(doc, dict):
        raise FormatError(f"{source}: top level must be an object with 'charities' and 'agents'")
    charities = doc.get("charities")
    if not isinstance(charities, list) or not all(isinstance(c, str) for c in charities):
        raise FormatError(f"{source}: field 'charities' must be an array of strings")
    agents_doc = doc.get("agents")
    if not isinstance(agents_doc, list):
        raise FormatError(f"{source}: field 'agents' must be an array")
    known = set(charities)
    agents = []
    for k, a in enumerate(agents_doc):
        where = f"{source}: agents[{k}]"
        if not isinstance(a, dict):
            raise FormatError(f"{where}: must be an object")
        name = a.get("name", f"agent{k + 1}")
        if not isinstance(name, str):
            raise FormatError(f"{where}.name: must be a string")
        if "contribution" not in a:
            raise FormatError(f"{where}: missing field 'contribution'")
        contribution = parse_number(a["contribution"], f"{where}.contribution")
        vals = a.get("values")
        if not isinstance(vals, dict):
            raise FormatError(f"{where}.values: must be an object mapping charity to value")
        unknown = sorted(set(vals) - known)
        if unknown:
            raise FormatError(f"{where}.values: unknown charities {unknown}")
        parsed = {c: parse_number(v, f"{where}.values.{c}") for c, v in vals.items()}
        agents.append(AgentSpec(name, contribution, {c: v for c, v in parsed.items() if v != 0}))
    try:
        return Profile(tuple(charities), tuple(agents))
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from None


def load_profile(path) -> Profile:
    return profile_from_dict(_load_json(path), str(path))


def profile_to_dict(profile: Profile) -> dict:
    return {
        "charities": list(profile.charities),
        "agents": [
            {
                "name": a.name,
                "contribution": fmt_number(a.contribution),
                "values": {c: fmt_number(a.value(c)) for c in profile.charities if a.value(c) != 0},
            }
            for a in profile.agents
        ],
    }


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2) + "\n"


def write_json(path, doc: Any) -> None:
    Path(path).write_text(dumps(doc))


def load_distribution(path, profile: Profile) -> tuple:
    """A distribution given as an array, an object keyed by charity, or a result file."""
    doc = _load_json(path)
    return distribution_from(doc, profile, str(path))


def distribution_from(doc: Any, profile: Profile, source: str = "<distribution>") -> tuple:
    if isinstance(doc, dict) and "distribution" in doc:
        doc = doc["distribution"]
    if isinstance(doc, list):
        if len(doc) != profile.m:
            raise FormatError(f"{source}: expected {profile.m} amounts, got {len(doc)}")
        return tuple(parse_number(v, f"{source}[{k}]") for k, v in enumerate(doc))
    if isinstance(doc, dict):
        unknown = sorted(set(doc) - set(profile.charities))
        if unknown:
            raise FormatError(f"{source}: unknown charities {unknown}")
        return tuple(parse_number(doc.get(c, "0"), f"{source}.{c}") for c in profile.charities)
    raise FormatError(f"{source}: a distribution must be an array or an object")


def result_to_dict(profile: Profile, res: EquilibriumResult, decimals: Optional[int] = None) -> dict:
    def f(a):
        return fmt_number(a, decimals)

    extra = {}
    for k, v in sorted(res.extra.items()):
        if isinstance(v, (bool, str)) or v is None:
            extra[k] = v
        elif isinstance(v, (int, float, Fraction)):
            extra[k] = f(v)
        elif isinstance(v, (tuple, list)):
            extra[k] = [f(a) if isinstance(a, (int, float, Fraction)) else str(a) for a in v]
        else:
            extra[k] = str(v)
    return {
        "mode": res.mode,
        "distribution": {c: f(a) for c, a in zip(profile.charities, res.distribution)},
        "decomposition": {
            a.name: {c: f(v) for c, v in zip(profile.charities, row)} for a, row in zip(profile.agents, res.decomposition)
        },
        "utilities": {a.name: f(u) for a, u in zip(profile.agents, res.utilities)},
        "nash_welfare": fmt_number(float(res.nash_welfare), decimals),
        "residual": f(res.residual),
        "solver": {
            "method": res.method,
            "iterations": str(res.iterations),
            "converged": res.converged,
            "wall_time": f"{res.wall_time:.6f}",
            "extra": extra,
        },
    }


def _parse_any(text: str, exact: bool, where: str):
    if exact:
        return parse_number(text, where)
    try:
        return float(text)
    except ValueError:
        raise FormatError(f"{where}: cannot parse {text!r} as a float") from None


def result_from_dict(doc: dict, profile: Profile, source: str = "<result>") -> EquilibriumResult:
    exact = doc.get("mode") == "exact"
    dist = tuple(_parse_any(doc["distribution"][c], exact, f"{source}.distribution.{c}") for c in profile.charities)
    rows = tuple(
        tuple(_parse_any(doc["decomposition"][a.name][c], exact, f"{source}.decomposition") for c in profile.charities)
        for a in profile.agents
    )
    utils = tuple(_parse_any(doc["utilities"][a.name], exact, f"{source}.utilities") for a in profile.agents)
    solver = doc.get("solver", {})
    return EquilibriumResult(
        distribution=dist,
        decomposition=rows,
        utilities=utils,
        nash_welfare=float(doc["nash_welfare"]),
        residual=_parse_any(doc["residual"], exact, f"{source}.residual"),
        exact=exact,
        method=solver.get("method", ""),
        iterations=int(solver.get("iterations", "0")),
        converged=bool(solver.get("converged", True)),
        wall_time=float(solver.get("wall_time", "0")),
    )


def load_result(path, profile: Profile) -> EquilibriumResult:
    return result_from_dict(_load_json(path), profile, str(path))

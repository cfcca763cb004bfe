import json
from fractions import Fraction as F

import pytest

from conftest import FIXTURES, FIXTURE_NAMES, load_fixture
from edr import io
from edr.solver import SolveConfig, solve_equilibrium


def write(tmp_path, doc, name="p.json"):
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return path


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixture_round_trip(name):
    p = load_fixture(name)
    assert io.profile_from_dict(io.profile_to_dict(p)) == p


def test_numbers_must_be_strings(tmp_path):
    path = write(tmp_path, {"charities": ["a"], "agents": [{"name": "x", "contribution": 3, "values": {"a": "1"}}]})
    with pytest.raises(io.FormatError, match=r"agents\[0\]\.contribution"):
        io.load_profile(path)


def test_bad_json_location(tmp_path):
    path = write(tmp_path, '{"charities": ["a"],\n  "agents": [}')
    with pytest.raises(io.FormatError, match="line 2"):
        io.load_profile(path)


def test_unknown_charity(tmp_path):
    path = write(tmp_path, {"charities": ["a"], "agents": [{"name": "x", "contribution": "1", "values": {"b": "1"}}]})
    with pytest.raises(io.FormatError, match="unknown charities"):
        io.load_profile(path)


def test_duplicate_names(tmp_path):
    agent = {"name": "x", "contribution": "1", "values": {"a": "1"}}
    path = write(tmp_path, {"charities": ["a"], "agents": [agent, agent]})
    with pytest.raises(io.FormatError, match="duplicate"):
        io.load_profile(path)


def test_fraction_and_decimal_forms(tmp_path):
    path = write(tmp_path, {"charities": ["a"], "agents": [{"name": "x", "contribution": "950/3", "values": {"a": "0.5"}}]})
    p = io.load_profile(path)
    assert p.contributions == (F(950, 3),) and p.values == ((F(1, 2),),)


def test_fmt_number():
    assert io.fmt_number(F(950, 3)) == "950/3"
    assert io.fmt_number(F(4)) == "4"
    assert io.fmt_number(F(950, 3), 2) == "316.67"
    assert io.fmt_number(0.5) == "0.5"


def test_distribution_forms(example1):
    want = (300, 300, 300, 100)
    assert io.distribution_from(["300", "300", "300", "100"], example1) == want
    assert io.distribution_from({"A": "300", "B": "300", "C": "300", "D": "100"}, example1) == want
    with pytest.raises(io.FormatError):
        io.distribution_from(["1"], example1)
    with pytest.raises(io.FormatError):
        io.distribution_from({"E": "1"}, example1)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_exact_result_round_trip(name, tmp_path):
    p = load_fixture(name)
    res = solve_equilibrium(p)
    path = tmp_path / "r.json"
    io.write_json(path, io.result_to_dict(p, res))
    back = io.load_result(path, p)
    assert back.exact
    assert back.distribution == res.distribution
    assert back.decomposition == res.decomposition
    assert back.utilities == res.utilities
    assert io.load_distribution(path, p) == res.distribution


def test_float_result_round_trip(example2, tmp_path):
    res = solve_equilibrium(example2, SolveConfig(method="dynamics"))
    back = io.result_from_dict(json.loads(io.dumps(io.result_to_dict(example2, res))), example2)
    assert back.distribution == res.distribution

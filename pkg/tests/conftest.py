import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from edr import io
from edr.model import Profile

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "edr" / "fixtures"
FIXTURE_NAMES = ("example1", "example2", "example_6_2", "remark_cd", "footnote_eff", "appendix_b")


def load_fixture(name: str) -> Profile:
    return io.load_profile(FIXTURES / f"{name}.json")


def load_expected(name: str) -> dict:
    return json.loads((FIXTURES / f"{name}.expected.json").read_text())


def as_tuple(profile: Profile, doc: dict) -> tuple:
    return tuple(Fraction(doc[c]) for c in profile.charities)


def rand_profile(rng, n, m, binary=False, max_c=100, zero_c=0.0):
    values = []
    for _ in range(n):
        k = int(rng.integers(1, m + 1))
        support = set(rng.choice(m, size=k, replace=False).tolist())
        if binary:
            values.append([1 if x in support else 0 for x in range(m)])
        else:
            values.append([int(rng.integers(1, 10)) if x in support else 0 for x in range(m)])
    contributions = [0 if rng.random() < zero_c else int(rng.integers(1, max_c + 1)) for _ in range(n)]
    if sum(contributions) == 0:
        contributions[0] = 1
    return Profile.from_matrix(values, contributions)


@pytest.fixture
def example1():
    return load_fixture("example1")


@pytest.fixture
def example2():
    return load_fixture("example2")


@pytest.fixture
def ex62():
    return load_fixture("example_6_2")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])

from fractions import Fraction as F

import pytest

from conftest import load_fixture
from edr.model import WelfareSpec
from edr.probes import (
    ProbeReport,
    TrialOutcome,
    misreport_row,
    pinned_c1,
    pinned_counterexample,
    probe_dynamics_potential,
    probe_group_strategyproofness,
    probe_gwelfare_decomposable,
    probe_monotonicity,
    random_profile,
    trial_rng,
)


def test_trial_rng_deterministic():
    assert trial_rng(7, 3).random() == trial_rng(7, 3).random()
    assert trial_rng(7, 3).random() != trial_rng(7, 4).random()


def test_random_profile_shape():
    p = random_profile(trial_rng(1, 0), 4, 5, binary=True)
    assert p.n == 4 and p.m == 5 and p.is_binary


def test_misreport_row_keeps_support_valid():
    rng = trial_rng(2, 0)
    for _ in range(50):
        row = misreport_row(rng, [F(1), F(0), F(2), F(0)], binary=False)
        assert any(v > 0 for v in row) and all(v >= 0 for v in row)


@pytest.mark.parametrize("p,c1", [(1, 2), (F(1, 2), 8), (2, 2)])
def test_pinned_c1(p, c1):
    assert pinned_c1(p) == c1


def test_pinned_counterexample_p1():
    ce = pinned_counterexample(1)
    assert ce["reproduced"]
    assert ce["welfare_equilibrium"] == 5 and ce["welfare_alternative"] == 6


def test_pinned_counterexample_others():
    for p in (F(1, 2), 2):
        assert pinned_counterexample(p)["reproduced"]


def test_report_merge_is_associative():
    parts = []
    for k in range(3):
        r = ProbeReport("gsp", 1)
        r.add(k, TrialOutcome(violation=k == 1, near_miss=False, exact=True, margin=float(k)))
        parts.append(r)
    a = parts[0].merge(parts[1]).merge(parts[2])
    b = parts[0].merge(parts[1].merge(parts[2]))
    assert a.to_dict() == b.to_dict()
    assert a.trials == 3 and a.violations == 1 and a.worst_margin == 0.0
    with pytest.raises(ValueError):
        parts[0].merge(ProbeReport("gsp", 2))


def test_zero_trials():
    rep = probe_group_strategyproofness(trials=0)
    assert rep.trials == 0 and rep.ok


@pytest.mark.parametrize(
    "run",
    [
        lambda: probe_group_strategyproofness(trials=40, seed=3),
        lambda: probe_monotonicity(kind="preference", trials=40, seed=3),
        lambda: probe_monotonicity(kind="contribution", trials=40, seed=3),
        lambda: probe_dynamics_potential(trials=10, seed=3),
    ],
)
def test_true_properties_have_no_violations(run):
    rep = run()
    assert rep.violations == 0
    assert rep.to_dict() == run().to_dict()


def test_probe_on_fixed_profile(example1):
    assert probe_group_strategyproofness(example1, trials=20, seed=1).violations == 0
    assert probe_monotonicity(example1, "contribution", trials=20, seed=1).violations == 0


def test_parallel_matches_serial():
    a = probe_group_strategyproofness(trials=12, seed=5, threads=1)
    b = probe_group_strategyproofness(trials=12, seed=5, threads=2)
    assert a.to_dict() == b.to_dict()


def test_gwelfare(example1):
    for w in (WelfareSpec.nash(), WelfareSpec.power(-1)):
        rep = probe_gwelfare_decomposable(example1, w, samples=300, seed=2)
        assert rep.violations == 0 and not rep.expected_counterexample
    rep = probe_gwelfare_decomposable(load_fixture("appendix_b"), WelfareSpec.power(1), samples=100, seed=2)
    assert rep.expected_counterexample and rep.ok
    assert rep.notes["pinned"]["reproduced"]


def test_gwelfare_rejects_weighted(ex62):
    with pytest.raises(ValueError):
        probe_gwelfare_decomposable(ex62, WelfareSpec.nash(), samples=5)

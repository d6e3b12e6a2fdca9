"""One pass/fail line per acceptance criterion, with the pinned tolerances."""

import pytest

from conftest import ACCEPTANCE_LINES
from voiceclone.repro import CRITERIA, run_acceptance

SEED = 0


@pytest.fixture(scope="module")
def report():
    rep = run_acceptance(SEED)
    ACCEPTANCE_LINES.extend(r.line() for r in rep.results)
    return {r.id: r for r in rep.results}


@pytest.mark.parametrize("cid", sorted(CRITERIA), ids=[CRITERIA[c][0].replace(" ", "_") for c in sorted(CRITERIA)])
def test_criterion(report, cid):
    result = report[cid]
    print(result.line())
    assert result.passed, result.measured


def test_report_is_complete(report):
    assert sorted(report) == list(range(1, 11))


def test_gradient_fidelity_tolerance(report):
    m = report[1].measured
    assert m["worst_rel_t1"] <= 1e-4 and m["worst_rel_t2"] <= 1e-4


def test_oracle_tolerance(report):
    m = report[2].measured
    assert m["instances"] >= 100
    assert m["max_abs_pool"] <= 1e-10 and m["max_abs_cross"] <= 1e-10


def test_permutation_tolerance(report):
    m = report[3].measured
    assert m["permutations"] == 720 and m["max_abs_change"] <= 1e-9


def test_degeneracy_tolerance(report):
    assert report[4].measured["max_abs"] <= 1e-12


def test_separability_margin(report):
    m = report[7].measured
    assert m["margin_t1"] >= 0.2 and m["margin_t2"] >= 0.2


def test_latency_ceiling(report):
    assert report[8].measured["median_s"] < 11.0


def test_enhancement_thresholds(report):
    m = report[10].measured
    assert m["snr_improvement_db"] >= 6.0 and m["passthrough_identity"]
    assert m["max_energy_ratio"] <= 1.0 + 1e-12


def test_same_seed_same_report(report):
    fast = sorted(set(CRITERIA) - {3, 7, 8})
    a = run_acceptance(SEED, only=fast).deterministic_view()
    b = run_acceptance(SEED, only=fast).deterministic_view()
    assert a == b
    full = {r.id: r for r in run_acceptance(SEED, only=fast).results}
    for cid in fast:
        assert full[cid].measured == report[cid].measured

"""
Integration tests for whole scenario runs.

These build the full pipeline (contraction, perturbation, PBW, transfer) and
run every check group on small caps.
"""

from dataclasses import replace

import pytest

from shtransfer.core.faults import KNOWN_FAULTS
from shtransfer.types import Caps
from shtransfer.utils.checks import builtin_scenarios, mutation_records, run_checks
from shtransfer.utils.export import dumps, report_to_dict
from shtransfer.utils.validation import load_scenario

pytestmark = [pytest.mark.integration, pytest.mark.slow]

CAPS = Caps(max_arity=4, max_order=2, max_degree=1, samples=40, audits=10)


def failures(report):
    return [(r.check_id, r.witness) for r in report.sorted_checks() if not r.passed]


@pytest.fixture(scope="module")
def scenarios():
    return {s.name: s for s in builtin_scenarios(CAPS)}


class TestBuiltinScenarios:
    """Every built-in scenario passes its own checks."""

    @pytest.mark.parametrize("name", ["flat", "F1", "F2", "toy", "abstract"])
    def test_scenario_passes(self, scenarios, name):
        report = run_checks(scenarios[name], CAPS)
        assert report.checks
        assert failures(report) == []

    def test_f1_covers_the_suite(self, scenarios):
        report = run_checks(scenarios["F1"], CAPS)
        prefixes = {r.check_id.split(".")[0] for r in report.checks}
        assert {"contraction", "connection", "decomposition", "pipeline"} <= prefixes
        ids = {r.check_id for r in report.checks}
        assert "pipeline.stasheff.k4" in ids
        assert "pipeline.vanishing.alpha4" in ids

    def test_reports_are_deterministic(self, scenarios):
        scenario = replace(scenarios["F2"], seed=5)
        first = dumps(report_to_dict(run_checks(scenario, CAPS)))
        second = dumps(report_to_dict(run_checks(scenario, CAPS, jobs=3)))
        assert first == second


class TestShippedScenarios:
    """The scenario files under docs/scenarios."""

    @pytest.mark.parametrize("name", ["F1", "F2", "abstract", "flat", "toy"])
    def test_passes_on_small_caps(self, scenario_dir, name):
        scenario = load_scenario(scenario_dir / f"{name}.json")
        report = run_checks(scenario, CAPS)
        assert failures(report) == []

    def test_corrupted_fails(self, scenario_dir):
        scenario = load_scenario(scenario_dir / "corrupted.json")
        report = run_checks(scenario)
        assert not report.passed
        failed = [check_id for check_id, _ in failures(report)]
        assert any(check_id.startswith("pipeline.stasheff") for check_id in failed)
        assert all(witness for _, witness in failures(report))


@pytest.fixture(scope="module")
def mutations():
    return {record.check_id: record for record in mutation_records()}


class TestMutations:
    """Every injected fault is caught by some check."""

    def test_every_fault_is_caught(self, mutations):
        records = list(mutations.values())
        assert [r.check_id for r in records] == [f"mutation.{f}" for f in KNOWN_FAULTS]
        missed = [r.check_id for r in records if not r.passed]
        assert missed == []
        for record in records:
            assert record.details["caught_by"]

    def test_run_stops_at_the_first_failing_group(self, mutations):
        curvature = mutations["mutation.foliation.curvature"]
        assert curvature.details["caught_by"] == ["envelope.error"]

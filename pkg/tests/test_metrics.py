import json

import pytest
from hypothesis import given, strategies as st

from gridcascade import miim
from gridcascade.metrics import (
    MetricsError,
    breakdown_by_kind,
    build_report,
    decompose_direct_vs_cascade,
    emit_report,
    operability,
    reports_to_csv,
    reports_to_json,
    resilience_gap,
    total_affected,
)
from gridcascade.miim import CascadeTrace, cascade, parse_rules
from gridcascade.scenarios import Scenario, build_scenario_failures
from gridcascade.topology import Entity, EntityKind


def test_operability_trivials():
    assert operability({f"e{i}": 2 for i in range(446)}) == 1.0
    half = {f"a{i}": 2 for i in range(223)} | {f"b{i}": 0 for i in range(223)}
    assert operability(half) == 0.5
    assert operability({"a": 1}) == 0.5
    with pytest.raises(MetricsError):
        operability({}, n=0)


def test_resilience_gap_values():
    assert resilience_gap(1.0) == 0.0
    assert resilience_gap(0.4753) == pytest.approx(0.5247)
    assert resilience_gap(0.1760) == pytest.approx(0.8240)
    with pytest.raises(MetricsError):
        resilience_gap(1.5)


def _chain_trace():
    rules = parse_rules("a <- hard: b\nb <- hard: c")
    return cascade(["a", "b", "c", "d"], rules, clamp={"c"})


def test_total_affected_counts_clamped():
    trace = _chain_trace()
    assert total_affected(trace) == 3
    empty = cascade(["a", "b"], [], clamp=set())
    assert total_affected(empty) == 0


def test_decomposition():
    trace = _chain_trace()
    assert decompose_direct_vs_cascade(trace) == (1, 2)
    no_rules = cascade(["a", "b", "c"], [], clamp={"a", "b"})
    assert decompose_direct_vs_cascade(no_rules) == (2, 0)


def test_breakdown_by_kind():
    entities = [
        Entity("bus_001", EntityKind.BUS, "s001"),
        Entity("srv_s001", EntityKind.SERVER, "s001"),
        Entity("pmu_s001", EntityKind.PMU, "s001"),
    ]
    states = {"bus_001": 1, "srv_s001": 0, "pmu_s001": 2}
    out = breakdown_by_kind(states, entities)
    assert out["bus"] == {"failed": 0, "degraded": 1, "operational": 0}
    assert out["server"]["failed"] == 1
    assert out["pmu"]["operational"] == 1


def test_breakdown_partitions_population(default_network):
    scenario = Scenario("Z", "Severe Weather", "Coastal", "p90", 0.3)
    failures = build_scenario_failures(default_network, scenario)
    rules = parse_rules(default_network.rules_text)
    trace = cascade(default_network.entity_ids, rules, failures.clamp)
    out = breakdown_by_kind(trace.final, default_network.entities)
    populations = {k: len(v) for k, v in default_network.entities_by_kind().items()}
    for kind, counts in out.items():
        assert counts["failed"] + counts["degraded"] + counts["operational"] == populations[kind]


def test_gap_identity_and_monotonicity(default_network):
    rules = parse_rules(default_network.rules_text)
    previous_o = None
    for fraction in (0.15, 0.20, 0.25, 0.35):
        failures = build_scenario_failures(
            default_network, Scenario(f"f{fraction}", "Severe Weather", "Coastal", "p75", fraction)
        )
        trace = cascade(default_network.entity_ids, rules, failures.clamp)
        report = build_report(f"f{fraction}", trace, default_network.entities)
        assert report.operability + report.resilience_gap == pytest.approx(1.0, abs=1e-15)
        assert report.total_affected >= report.initial_failed
        if previous_o is not None:
            assert report.operability <= previous_o  # larger zones never help
        previous_o = report.operability


def test_report_serialization_deterministic(tmp_path, default_network):
    rules = parse_rules(default_network.rules_text)
    reports = []
    for fraction, name in ((0.2, "S-a"), (0.35, "S-b")):
        failures = build_scenario_failures(
            default_network, Scenario(name, "Severe Weather", "Coastal", "p75", fraction)
        )
        trace = cascade(default_network.entity_ids, rules, failures.clamp)
        reports.append(build_report(name, trace, default_network.entities))

    first = tmp_path / "one"
    second = tmp_path / "two"
    paths_one = emit_report(reports, first)
    paths_two = emit_report(list(reversed(reports)), second)
    assert [p.name for p in paths_one] == [p.name for p in paths_two]
    for p1, p2 in zip(paths_one, paths_two):
        assert p1.read_bytes() == p2.read_bytes()

    payload = json.loads((first / "resilience_report.json").read_text())
    assert [row["scenario"] for row in payload] == ["S-a", "S-b"]
    expected_keys = {
        "scenario", "initial_failed", "cascade_depth", "operability", "resilience_gap",
        "total_affected", "affected_failed_only", "breakdown", "initial_by_kind",
        "direct", "propagated",
    }
    assert set(payload[0]) == expected_keys
    csv_text = (first / "resilience_report.csv").read_text()
    assert csv_text.splitlines()[0].startswith("scenario,initial_failed,cascade_depth")


def test_emit_empty_reports_rejected(tmp_path):
    with pytest.raises(MetricsError):
        emit_report([], tmp_path)


@given(st.lists(st.integers(min_value=0, max_value=2), min_size=1, max_size=60))
def test_operability_bounds_and_monotone(states):
    mapping = {f"e{i}": s for i, s in enumerate(states)}
    o = operability(mapping)
    assert 0.0 <= o <= 1.0
    lowered = {k: max(0, v - 1) for k, v in mapping.items()}
    assert operability(lowered) <= o

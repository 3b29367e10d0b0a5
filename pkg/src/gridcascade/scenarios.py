"""Climate scenario definitions and initial failure set construction.

A scenario names an event type, a geographic zone flavor, a severity
percentile tier, and the fraction of the network initially affected. The
affected zone is the top-N substations by power-flow centrality; the initial
failure set covers every co-located power and communication entity, plus
aggregation devices within their kind's adjacency radius of the zone.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .topology import EntityKind, JointNetwork, Substation, rank_substations

SADM_RADIUS_KM = 35.0
OADM_RADIUS_KM = 50.0

EVENT_TYPES = ("Severe Weather", "Natural Disaster", "Winter Storm")
ZONES = ("Coastal", "Inland")
PERCENTILES = ("p75", "p90")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    event_type: str
    zone: str
    percentile: str
    affected_fraction: float
    expected_substations: int | None = None
    expected_initial_entities: int | None = None

    def __post_init__(self):
        if not 0.0 < self.affected_fraction <= 1.0:
            raise ScenarioError(
                f"{self.name}: affected_fraction must be in (0, 1], got {self.affected_fraction}"
            )
        if self.event_type not in EVENT_TYPES:
            raise ScenarioError(f"{self.name}: unknown event type {self.event_type!r}")
        if self.zone not in ZONES:
            raise ScenarioError(f"{self.name}: unknown zone {self.zone!r}")
        if self.percentile not in PERCENTILES:
            raise ScenarioError(f"{self.name}: unknown percentile tier {self.percentile!r}")


@dataclass(frozen=True)
class InitialFailureSet:
    scenario_name: str
    substation_ids: tuple[str, ...]
    entity_ids: tuple[str, ...]
    by_kind: dict[str, int]

    @property
    def clamp(self) -> frozenset:
        return frozenset(self.entity_ids)


def scope_to_count(fraction: float, total_substations: int) -> int:
    """Round-half-up count of substations in scope, clamped to at least 1."""
    if not 0.0 < fraction <= 1.0:
        raise ScenarioError(f"fraction must be in (0, 1], got {fraction}")
    if total_substations < 1:
        raise ScenarioError("need at least one substation")
    return max(1, int(math.floor(fraction * total_substations + 0.5)))


def select_affected_zone(ranked: list[Substation], n: int) -> list[Substation]:
    if n > len(ranked):
        raise ScenarioError(f"zone of {n} exceeds the {len(ranked)} available substations")
    return list(ranked[:n])


def build_initial_failures(
    zone: list[Substation],
    network: JointNetwork,
    scenario_name: str = "",
    sadm_radius_km: float = SADM_RADIUS_KM,
    oadm_radius_km: float = OADM_RADIUS_KM,
) -> InitialFailureSet:
    """Fail every entity co-located with the zone, plus nearby aggregation devices.

    S-ADMs join if their home substation is in the zone or within
    sadm_radius_km (inclusive) of any zone substation; OADMs likewise with
    oadm_radius_km.
    """
    zone_ids = {s.substation_id for s in zone}
    zone_coords = [(s.x_km, s.y_km) for s in zone]
    coords = {s.substation_id: (s.x_km, s.y_km) for s in network.substations}

    def within(home: str, radius: float) -> bool:
        if home in zone_ids:
            return True
        x, y = coords[home]
        return any(math.dist((x, y), zc) <= radius for zc in zone_coords)

    failed: list[str] = []
    for entity in network.entities:
        if entity.kind is EntityKind.SADM:
            include = within(entity.home_substation, sadm_radius_km)
        elif entity.kind is EntityKind.OADM:
            include = within(entity.home_substation, oadm_radius_km)
        else:
            include = entity.home_substation in zone_ids
        if include:
            failed.append(entity.entity_id)

    by_kind: dict[str, int] = {kind.value: 0 for kind in EntityKind}
    kind_of = {e.entity_id: e.kind.value for e in network.entities}
    for entity_id in failed:
        by_kind[kind_of[entity_id]] += 1
    return InitialFailureSet(
        scenario_name=scenario_name,
        substation_ids=tuple(sorted(zone_ids)),
        entity_ids=tuple(sorted(failed)),
        by_kind=by_kind,
    )


def build_scenario_failures(network: JointNetwork, scenario: Scenario) -> InitialFailureSet:
    ranked = rank_substations(network.substations)
    n = scope_to_count(scenario.affected_fraction, len(ranked))
    zone = select_affected_zone(ranked, n)
    return build_initial_failures(zone, network, scenario_name=scenario.name)


def load_scenarios(path: str | Path) -> list[Scenario]:
    """Load scenario rows from CSV; extra rows beyond the standard four are fine."""
    scenarios: list[Scenario] = []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        required = {"name", "event_type", "zone", "percentile", "affected_fraction"}
        if not reader.fieldnames or required - set(reader.fieldnames):
            raise ScenarioError(f"{path}: expected columns {sorted(required)}")
        for line_number, row in enumerate(reader, start=2):
            try:
                scenarios.append(
                    Scenario(
                        name=row["name"].strip(),
                        event_type=row["event_type"].strip(),
                        zone=row["zone"].strip(),
                        percentile=row["percentile"].strip(),
                        affected_fraction=float(row["affected_fraction"]),
                        expected_substations=_opt_int(row.get("expected_substations")),
                        expected_initial_entities=_opt_int(row.get("expected_initial_entities")),
                    )
                )
            except (ScenarioError, ValueError) as err:
                raise ScenarioError(f"{path} line {line_number}: {err}") from None
    if not scenarios:
        raise ScenarioError(f"{path}: no scenarios defined")
    return scenarios


def _opt_int(raw) -> int | None:
    if raw is None or not str(raw).strip():
        return None
    return int(str(raw).strip())


def failures_to_json(failures: list[InitialFailureSet], network: JointNetwork,
                     scenarios: list[Scenario] | None = None) -> str:
    expected = {}
    if scenarios:
        expected = {
            s.name: {
                "substations": s.expected_substations,
                "initial_entities": s.expected_initial_entities,
            }
            for s in scenarios
        }
    payload = []
    for fs in sorted(failures, key=lambda f: f.scenario_name):
        entry = {
            "scenario": fs.scenario_name,
            "substations": list(fs.substation_ids),
            "substation_count": len(fs.substation_ids),
            "initial_entities": len(fs.entity_ids),
            "by_kind": {k: v for k, v in sorted(fs.by_kind.items())},
            "entity_ids": list(fs.entity_ids),
        }
        ref = expected.get(fs.scenario_name)
        if ref:
            entry["reference"] = ref
        payload.append(entry)
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def failures_from_json(text: str) -> list[InitialFailureSet]:
    payload = json.loads(text)
    out = []
    for entry in payload:
        out.append(
            InitialFailureSet(
                scenario_name=entry["scenario"],
                substation_ids=tuple(entry["substations"]),
                entity_ids=tuple(entry["entity_ids"]),
                by_kind=dict(entry["by_kind"]),
            )
        )
    return out

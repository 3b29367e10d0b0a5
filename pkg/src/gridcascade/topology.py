"""Joint power-communication network construction over a bus/branch case.

Builds: parsed case -> DC power flow -> substation grouping -> planar layout ->
communication overlay (servers, gateways, PMUs, S-ADMs, OADMs) plus the
dependency rules that drive the cascade engine.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np


class CaseSchemaError(ValueError):
    pass


class TopologyError(ValueError):
    pass


class MappingError(ValueError):
    pass


class OverlayError(ValueError):
    pass


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Branch:
    branch_id: str
    from_bus: int
    to_bus: int
    reactance: float


@dataclass
class PowerCase:
    injections: dict[int, float]
    branches: list[Branch]
    slack: int

    @property
    def bus_ids(self) -> list[int]:
        return sorted(self.injections)


def parse_case(path: str | Path) -> PowerCase:
    """Parse the plain-text case format: `slack <id>`, `bus <id> <p_pu>`,
    `branch <id> <from> <to> <x_pu>`. Injections are rebalanced at the slack."""
    injections: dict[int, float] = {}
    branches: list[Branch] = []
    branch_ids: set[str] = set()
    slack = None
    with open(path, encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            kind = parts[0].lower()
            try:
                if kind == "slack":
                    if slack is not None:
                        raise CaseSchemaError(f"line {line_number}: duplicate slack designation")
                    slack = int(parts[1])
                elif kind == "bus":
                    bus = int(parts[1])
                    if bus in injections:
                        raise CaseSchemaError(f"line {line_number}: duplicate bus id {bus}")
                    injections[bus] = float(parts[2])
                elif kind == "branch":
                    branch_id = parts[1]
                    if branch_id in branch_ids:
                        raise CaseSchemaError(f"line {line_number}: duplicate branch id {branch_id}")
                    branch_ids.add(branch_id)
                    x = float(parts[4])
                    if x <= 0:
                        raise CaseSchemaError(f"line {line_number}: reactance must be positive")
                    branches.append(Branch(branch_id, int(parts[2]), int(parts[3]), x))
                else:
                    raise CaseSchemaError(f"line {line_number}: unknown directive {kind!r}")
            except (IndexError, ValueError) as err:
                if isinstance(err, CaseSchemaError):
                    raise
                raise CaseSchemaError(f"line {line_number}: malformed {kind} entry: {raw.strip()!r}") from None
    if slack is None:
        raise CaseSchemaError(f"{path}: no slack bus designated")
    if slack not in injections:
        raise CaseSchemaError(f"{path}: slack bus {slack} has no bus entry")
    for br in branches:
        for bus in (br.from_bus, br.to_bus):
            if bus not in injections:
                raise CaseSchemaError(f"branch {br.branch_id} references unknown bus {bus}")

    _check_connected(injections, branches)
    # balance: the slack absorbs the residual so injections sum to zero
    others = sum(p for bus, p in injections.items() if bus != slack)
    injections[slack] = -others
    return PowerCase(injections, branches, slack)


def _check_connected(injections, branches) -> None:
    adjacency: dict[int, set[int]] = {bus: set() for bus in injections}
    for br in branches:
        adjacency[br.from_bus].add(br.to_bus)
        adjacency[br.to_bus].add(br.from_bus)
    buses = list(injections)
    seen = {buses[0]}
    stack = [buses[0]]
    while stack:
        bus = stack.pop()
        for other in adjacency[bus]:
            if other not in seen:
                seen.add(other)
                stack.append(other)
    isolated = sorted(set(injections) - seen)
    if isolated:
        raise TopologyError(f"case graph is disconnected; unreachable buses {isolated}")


def dc_power_flow(case: PowerCase) -> dict[str, float]:
    """Linear DC solve of B theta = P with the slack angle fixed at zero.

    Returns signed per-unit flow per branch id, oriented from_bus -> to_bus.
    """
    buses = case.bus_ids
    index = {bus: i for i, bus in enumerate(buses)}
    n = len(buses)
    B = np.zeros((n, n))
    for br in case.branches:
        i, j = index[br.from_bus], index[br.to_bus]
        y = 1.0 / br.reactance
        B[i, i] += y
        B[j, j] += y
        B[i, j] -= y
        B[j, i] -= y
    keep = [i for bus, i in index.items() if bus != case.slack]
    keep.sort()
    reduced = B[np.ix_(keep, keep)]
    p = np.array([case.injections[buses[i]] for i in keep])
    try:
        theta_reduced = np.linalg.solve(reduced, p)
    except np.linalg.LinAlgError:
        diag = np.abs(np.diag(reduced))
        worst = int(np.argmin(diag))
        raise NumericalError(
            f"singular susceptance matrix; near-zero pivot {diag[worst]:.3e} "
            f"at bus {buses[keep[worst]]}"
        ) from None
    theta = np.zeros(n)
    theta[keep] = theta_reduced
    return {
        br.branch_id: (theta[index[br.from_bus]] - theta[index[br.to_bus]]) / br.reactance
        for br in case.branches
    }


# --- substations -----------------------------------------------------------------


@dataclass
class Substation:
    substation_id: str
    buses: tuple[int, ...]
    x_km: float | None = None
    y_km: float | None = None
    centrality: float = 0.0


def load_substation_mapping(path: str | Path) -> dict[int, str]:
    mapping: dict[int, str] = {}
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or {"bus_id", "substation_id"} - set(reader.fieldnames):
            raise MappingError(f"{path}: expected columns bus_id,substation_id")
        for row in reader:
            bus = int(row["bus_id"])
            if bus in mapping:
                raise MappingError(f"{path}: bus {bus} mapped twice")
            mapping[bus] = row["substation_id"].strip()
    return mapping


def group_substations(case: PowerCase, mapping: dict[int, str]) -> list[Substation]:
    """Partition the case's buses into substations per the mapping."""
    missing = sorted(set(case.injections) - set(mapping))
    if missing:
        more = f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""
        raise MappingError(f"mapping is missing bus {missing[0]}{more}")
    extra = sorted(set(mapping) - set(case.injections))
    if extra:
        raise MappingError(f"mapping references unknown bus {extra[0]}")
    members: dict[str, list[int]] = {}
    for bus in sorted(mapping):
        members.setdefault(mapping[bus], []).append(bus)
    return [
        Substation(substation_id, tuple(sorted(buses)))
        for substation_id, buses in sorted(members.items())
    ]


def identity_mapping(case: PowerCase) -> dict[int, str]:
    return {bus: f"s{bus:03d}" for bus in case.injections}


def load_coordinates(path: str | Path) -> dict[str, tuple[float, float]]:
    coords: dict[str, tuple[float, float]] = {}
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or {"substation_id", "x_km", "y_km"} - set(reader.fieldnames):
            raise MappingError(f"{path}: expected columns substation_id,x_km,y_km")
        for row in reader:
            coords[row["substation_id"].strip()] = (float(row["x_km"]), float(row["y_km"]))
    return coords


def assign_coordinates(
    substations: list[Substation],
    case: PowerCase,
    seed: int = 0,
    coordinates: dict[str, tuple[float, float]] | None = None,
    target_spacing_km: float = 30.0,
) -> None:
    """Give each substation planar km coordinates.

    With an explicit coordinate table the values pass through unchanged.
    Otherwise a deterministic force-directed embedding of the substation
    adjacency graph is scaled so the median nearest-neighbor distance is
    target_spacing_km, which keeps the 35/50 km adjacency radii meaningful.
    """
    if coordinates is not None:
        missing = [s.substation_id for s in substations if s.substation_id not in coordinates]
        if missing:
            raise MappingError(f"coordinate table is missing substation {missing[0]}")
        for s in substations:
            s.x_km, s.y_km = coordinates[s.substation_id]
        return

    ids = [s.substation_id for s in substations]
    index = {sid: i for i, sid in enumerate(ids)}
    home = {}
    for s in substations:
        for bus in s.buses:
            home[bus] = index[s.substation_id]
    n = len(ids)
    edges = set()
    for br in case.branches:
        a, b = home[br.from_bus], home[br.to_bus]
        if a != b:
            edges.add((min(a, b), max(a, b)))

    rng = np.random.default_rng(seed)
    angles = 2.0 * np.pi * np.arange(n) / n
    pos = np.column_stack([np.cos(angles), np.sin(angles)])
    pos += rng.normal(scale=0.01, size=pos.shape)

    k = 1.0 / math.sqrt(n)  # Fruchterman-Reingold ideal spring length
    edge_idx = np.array(sorted(edges)) if edges else np.empty((0, 2), dtype=int)
    for iteration in range(200):
        delta = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((delta**2).sum(axis=2))
        np.fill_diagonal(dist, 1.0)
        repulse = (k * k / dist**2)[:, :, None] * delta / dist[:, :, None]
        disp = repulse.sum(axis=1)
        if len(edge_idx):
            d = pos[edge_idx[:, 0]] - pos[edge_idx[:, 1]]
            lengths = np.sqrt((d**2).sum(axis=1))
            lengths[lengths == 0] = 1e-9
            pull = (lengths / k)[:, None] * d / lengths[:, None]
            np.add.at(disp, edge_idx[:, 0], -pull)
            np.add.at(disp, edge_idx[:, 1], pull)
        lengths = np.sqrt((disp**2).sum(axis=1))
        lengths[lengths == 0] = 1e-9
        temperature = 0.1 * (1.0 - iteration / 200)
        pos += disp / lengths[:, None] * np.minimum(lengths, temperature)[:, None]

    # scale to km so the median nearest-neighbor spacing hits the target
    delta = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((delta**2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    nearest = dist.min(axis=1)
    scale = target_spacing_km / float(np.median(nearest))
    pos *= scale
    for s, (x, y) in zip(substations, pos):
        s.x_km, s.y_km = float(x), float(y)


def power_flow_centrality(substation: Substation, case: PowerCase, flows: dict[str, float]) -> float:
    """Sum of |flow| over branches touching the substation; internal lines count once."""
    members = set(substation.buses)
    total = 0.0
    for br in case.branches:
        if br.from_bus in members or br.to_bus in members:
            total += abs(flows[br.branch_id])
    return total


def rank_substations(substations: list[Substation]) -> list[Substation]:
    """Descending centrality, ties broken by substation id."""
    return sorted(substations, key=lambda s: (-s.centrality, s.substation_id))


# --- communication overlay ----------------------------------------------------------


class EntityKind(str, Enum):
    BUS = "bus"
    SERVER = "server"
    GATEWAY = "gateway"
    PMU = "pmu"
    SADM = "sadm"
    OADM = "oadm"


POWER_KINDS = frozenset({EntityKind.BUS})
COMM_KINDS = frozenset(
    {EntityKind.SERVER, EntityKind.GATEWAY, EntityKind.PMU, EntityKind.SADM, EntityKind.OADM}
)

PLACEMENTS = ("top_centrality", "stride")


@dataclass(frozen=True)
class Entity:
    entity_id: str
    kind: EntityKind
    home_substation: str


@dataclass(frozen=True)
class KindConfig:
    count: int
    placement: str = "stride"


@dataclass(frozen=True)
class OverlayConfig:
    pmu: KindConfig = KindConfig(61, "top_centrality")
    sadm: KindConfig = KindConfig(32, "stride")
    oadm: KindConfig = KindConfig(21, "stride")
    expected_total_entities: int | None = 446

    @classmethod
    def from_json(cls, text: str) -> "OverlayConfig":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as err:
            raise OverlayError(f"overlay config is not valid JSON: {err}") from None
        kinds = {}
        for name in ("pmu", "sadm", "oadm"):
            section = payload.get(name)
            if not isinstance(section, dict) or "count" not in section:
                raise OverlayError(f"overlay config needs a {name!r} section with a count")
            placement = section.get("placement", "stride")
            if placement not in PLACEMENTS:
                raise OverlayError(f"unknown placement policy {placement!r} for {name}")
            kinds[name] = KindConfig(int(section["count"]), placement)
        return cls(
            pmu=kinds["pmu"],
            sadm=kinds["sadm"],
            oadm=kinds["oadm"],
            expected_total_entities=payload.get("expected_total_entities"),
        )


def bus_entity_id(bus: int) -> str:
    return f"bus_{bus:03d}"


def _place(substations_by_id, ranked, config: KindConfig, kind_name: str) -> list[Substation]:
    count = config.count
    if count < 0:
        raise OverlayError(f"{kind_name}: negative count {count}")
    if count > len(substations_by_id):
        raise OverlayError(
            f"{kind_name}: {count} devices cannot be placed one-per-substation "
            f"across {len(substations_by_id)} substations"
        )
    if config.placement == "top_centrality":
        return ranked[:count]
    total = len(substations_by_id)
    return [substations_by_id[(k * total) // count] for k in range(count)] if count else []


def build_comm_overlay(
    substations: list[Substation], config: OverlayConfig
) -> tuple[list[Entity], str]:
    """Emit the non-cable entity census and the default dependency rules (DSL text).

    Per substation: one server and one gateway. PMUs, S-ADMs, and OADMs are
    placed one-per-substation under the configured policy. Rule template:
    server and gateway fail together (hard, both ways); each gateway needs its
    nearest aggregation device (hard); PMUs need their server (hard); buses
    degrade without their server (soft); aggregation devices need their server
    (hard).
    """
    by_id = sorted(substations, key=lambda s: s.substation_id)
    ranked = rank_substations(substations)
    entities: list[Entity] = []
    for s in by_id:
        for bus in s.buses:
            entities.append(Entity(bus_entity_id(bus), EntityKind.BUS, s.substation_id))
    for s in by_id:
        entities.append(Entity(f"srv_{s.substation_id}", EntityKind.SERVER, s.substation_id))
        entities.append(Entity(f"gw_{s.substation_id}", EntityKind.GATEWAY, s.substation_id))
    pmu_homes = _place(by_id, ranked, config.pmu, "pmu")
    sadm_homes = _place(by_id, ranked, config.sadm, "sadm")
    oadm_homes = _place(by_id, ranked, config.oadm, "oadm")
    for s in sorted(pmu_homes, key=lambda s: s.substation_id):
        entities.append(Entity(f"pmu_{s.substation_id}", EntityKind.PMU, s.substation_id))
    for s in sorted(sadm_homes, key=lambda s: s.substation_id):
        entities.append(Entity(f"sadm_{s.substation_id}", EntityKind.SADM, s.substation_id))
    for s in sorted(oadm_homes, key=lambda s: s.substation_id):
        entities.append(Entity(f"oadm_{s.substation_id}", EntityKind.OADM, s.substation_id))

    if config.expected_total_entities is not None and len(entities) != config.expected_total_entities:
        bus_count = sum(1 for e in entities if e.kind is EntityKind.BUS)
        raise OverlayError(
            f"overlay yields {len(entities)} entities "
            f"({bus_count} buses + {len(by_id)} servers + {len(by_id)} gateways "
            f"+ {config.pmu.count} PMUs + {config.sadm.count} S-ADMs + {config.oadm.count} OADMs), "
            f"expected {config.expected_total_entities}"
        )

    rules = _emit_rules(by_id, entities)
    return entities, rules


def _emit_rules(substations: list[Substation], entities: list[Entity]) -> str:
    coords = {s.substation_id: (s.x_km, s.y_km) for s in substations}
    aggregators = [
        e for e in entities if e.kind in (EntityKind.SADM, EntityKind.OADM)
    ]
    pmus = {e.home_substation for e in entities if e.kind is EntityKind.PMU}

    def nearest_aggregator(substation_id: str) -> str | None:
        if not aggregators:
            return None
        x, y = coords[substation_id]
        best = min(
            aggregators,
            key=lambda e: (
                math.dist((x, y), coords[e.home_substation]),
                e.entity_id,
            ),
        )
        return best.entity_id

    lines = ["# default dependency rules generated by the network builder"]
    rules: list[str] = []
    for s in substations:
        sid = s.substation_id
        srv, gw = f"srv_{sid}", f"gw_{sid}"
        rules.append(f"{srv} <- hard: {gw}")
        rules.append(f"{gw} <- hard: {srv}")
        uplink = nearest_aggregator(sid)
        if uplink is not None:
            rules.append(f"{gw} <- hard: {uplink}")
        for bus in s.buses:
            rules.append(f"{bus_entity_id(bus)} <- soft: {srv}")
        if sid in pmus:
            rules.append(f"pmu_{sid} <- hard: {srv}")
    for e in entities:
        if e.kind in (EntityKind.SADM, EntityKind.OADM):
            rules.append(f"{e.entity_id} <- hard: srv_{e.home_substation}")
    lines.extend(sorted(rules))
    return "\n".join(lines) + "\n"


# --- joint network ----------------------------------------------------------------


@dataclass
class JointNetwork:
    substations: list[Substation]
    entities: list[Entity]
    flows: dict[str, float]
    rules_text: str
    bus_count: int
    branch_count: int

    @property
    def entity_ids(self) -> list[str]:
        return [e.entity_id for e in self.entities]

    def entities_by_kind(self) -> dict[str, list[Entity]]:
        out: dict[str, list[Entity]] = {}
        for e in self.entities:
            out.setdefault(e.kind.value, []).append(e)
        return out

    def substation(self, substation_id: str) -> Substation:
        for s in self.substations:
            if s.substation_id == substation_id:
                return s
        raise KeyError(substation_id)


def build_joint_network(
    case: PowerCase,
    mapping: dict[int, str],
    overlay: OverlayConfig,
    seed: int = 0,
    coordinates: dict[str, tuple[float, float]] | None = None,
) -> JointNetwork:
    flows = dc_power_flow(case)
    substations = group_substations(case, mapping)
    assign_coordinates(substations, case, seed=seed, coordinates=coordinates)
    for s in substations:
        s.centrality = power_flow_centrality(s, case, flows)
    entities, rules_text = build_comm_overlay(substations, overlay)
    return JointNetwork(
        substations=substations,
        entities=entities,
        flows=flows,
        rules_text=rules_text,
        bus_count=len(case.injections),
        branch_count=len(case.branches),
    )


def network_to_json(network: JointNetwork) -> str:
    payload = {
        "bus_count": network.bus_count,
        "branch_count": network.branch_count,
        "substations": [
            {
                "id": s.substation_id,
                "buses": list(s.buses),
                "x_km": s.x_km,
                "y_km": s.y_km,
                "centrality": s.centrality,
            }
            for s in network.substations
        ],
        "entities": [
            {"id": e.entity_id, "kind": e.kind.value, "home": e.home_substation}
            for e in network.entities
        ],
        "flows": network.flows,
        "rules": network.rules_text,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def network_from_json(text: str) -> JointNetwork:
    payload = json.loads(text)
    substations = [
        Substation(s["id"], tuple(s["buses"]), s["x_km"], s["y_km"], s["centrality"])
        for s in payload["substations"]
    ]
    entities = [
        Entity(e["id"], EntityKind(e["kind"]), e["home"]) for e in payload["entities"]
    ]
    return JointNetwork(
        substations=substations,
        entities=entities,
        flows=payload["flows"],
        rules_text=payload["rules"],
        bus_count=payload["bus_count"],
        branch_count=payload["branch_count"],
    )

import csv
import random
from datetime import datetime, timedelta, timezone

import pytest

from gridcascade import defaults, topology
from gridcascade.outages import EventCategory, OutageRecord

COASTAL_STATES = ["TX", "FL", "CA", "MI", "NC", "NY", "LA", "WA"]
INLAND_STATES = ["CO", "KS", "MO", "TN", "NV", "OK"]

RAW_TYPES = [
    ("Severe Weather", 0.48),
    ("Winter Storm", 0.12),
    ("Natural Disaster", 0.08),
    ("Equipment Failure", 0.2),
    ("Vandalism", 0.12),
]


def make_record(
    event_id="e1",
    category=EventCategory.SEVERE_WEATHER,
    state="TX",
    year=2018,
    month=6,
    duration_minutes=120.0,
    max_customers=1000,
    raw_event_type=None,
):
    start = datetime(year, month, 15, 12, 0, tzinfo=timezone.utc)
    return OutageRecord(
        event_id=event_id,
        raw_event_type=raw_event_type or category.value,
        category=category,
        state=state,
        start_time=start,
        end_time=start + timedelta(minutes=duration_minutes),
        duration_minutes=duration_minutes,
        max_customers=max_customers,
        year=year,
        flagged=False,
    )


def synthetic_rows(n, seed=20250809):
    """Deterministic synthetic outage rows shaped like the canonical CSV."""
    rng = random.Random(seed)
    states = COASTAL_STATES + INLAND_STATES
    raw_types = [t for t, _ in RAW_TYPES]
    weights = [w for _, w in RAW_TYPES]
    rows = []
    for i in range(n):
        year = rng.choices(range(2015, 2024), weights=range(3, 12))[0]
        month = rng.randint(1, 12)
        day = rng.randint(1, 28)
        hour = rng.randint(0, 23)
        start = datetime(year, month, day, hour, tzinfo=timezone.utc)
        duration = round(rng.lognormvariate(4.5, 1.0), 1)
        state = rng.choice(states)
        # coastal events trend larger, echoing the severity disparity
        scale = 1.6 if state in COASTAL_STATES else 1.0
        customers = int(rng.lognormvariate(7.0, 1.3) * scale)
        rows.append(
            {
                "event_id": f"ev{i:05d}",
                "raw_event_type": rng.choices(raw_types, weights=weights)[0],
                "state": state,
                "start_time": start.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "end_time": (start + timedelta(minutes=duration)).strftime("%Y-%m-%dT%H:%M:%SZ"),
                "duration_minutes": str(duration),
                "max_customers": str(customers),
            }
        )
    return rows


def write_outage_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=[
                "event_id", "raw_event_type", "state", "start_time",
                "end_time", "duration_minutes", "max_customers",
            ],
        )
        writer.writeheader()
        writer.writerows(rows)


@pytest.fixture(scope="session")
def default_case():
    return topology.parse_case(defaults.default_path(defaults.CASE_FILE))


@pytest.fixture(scope="session")
def default_network(default_case):
    mapping = topology.load_substation_mapping(
        defaults.default_path(defaults.SUBSTATION_MAPPING)
    )
    overlay = topology.OverlayConfig.from_json(
        defaults.default_path(defaults.OVERLAY_CONFIG).read_text(encoding="utf-8")
    )
    return topology.build_joint_network(default_case, mapping, overlay, seed=0)


@pytest.fixture()
def outage_csv(tmp_path):
    path = tmp_path / "outages.csv"
    write_outage_csv(path, synthetic_rows(600))
    return path

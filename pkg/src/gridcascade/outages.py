"""Outage record ingestion: CSV parsing, category standardization, geographic grouping."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path

STUDY_START_YEAR = 2015
STUDY_END_YEAR = 2023

#: canonical input schema, in column order
CSV_COLUMNS = (
    "event_id",
    "raw_event_type",
    "state",
    "start_time",
    "end_time",
    "duration_minutes",
    "max_customers",
)

CENSUS_REGIONS = ("Northeast", "Midwest", "South", "West")


class SchemaError(ValueError):
    """Input file does not match the documented schema."""


class UnknownStateError(KeyError):
    """State code not present in the geographic grouping table."""


class EventCategory(Enum):
    SEVERE_WEATHER = "Severe Weather"
    WINTER_STORM = "Winter Storm"
    NATURAL_DISASTER = "Natural Disaster"
    OTHER = "Other"

    @property
    def is_climate(self) -> bool:
        return self in _CLIMATE_CATEGORIES


_CLIMATE_CATEGORIES = frozenset(
    {EventCategory.SEVERE_WEATHER, EventCategory.WINTER_STORM, EventCategory.NATURAL_DISASTER}
)


@dataclass(frozen=True)
class OutageRecord:
    event_id: str
    raw_event_type: str
    category: EventCategory
    state: str
    start_time: datetime
    end_time: datetime
    duration_minutes: float
    max_customers: int | None
    year: int
    # duration field disagreed with the timestamps by more than a minute;
    # the timestamp-derived duration was kept
    flagged: bool = False


@dataclass(frozen=True)
class RejectedRow:
    line_number: int
    reason: str
    raw: dict[str, str]

    @property
    def event_id(self) -> str:
        return (self.raw.get("event_id") or "").strip()


@dataclass(frozen=True)
class GeoGroup:
    state: str
    coastal: bool
    census_region: str


@dataclass
class CategoryMapping:
    """Raw event type -> standardized category, counting unmapped raw types."""

    raw_to_standard: dict[str, EventCategory]
    unmapped: Counter = field(default_factory=Counter)

    def standardize(self, raw_event_type: str) -> EventCategory:
        key = raw_event_type.strip()
        category = self.raw_to_standard.get(key)
        if category is None:
            self.unmapped[key] += 1
            return EventCategory.OTHER
        return category


@dataclass
class IngestResult:
    records: list[OutageRecord]
    rejects: list[RejectedRow]
    flagged_count: int = 0

    def category_counts(self) -> Counter:
        return Counter(r.category.value for r in self.records)


def standardize_category(raw_event_type: str, mapping: CategoryMapping) -> EventCategory:
    """Total mapping: anything not in the table lands in the Other bucket."""
    return mapping.standardize(raw_event_type)


def load_category_mapping(path: str | Path) -> CategoryMapping:
    by_value = {c.value: c for c in EventCategory}
    table: dict[str, EventCategory] = {}
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, ("raw_type", "standard_category"), path)
        for row in reader:
            standard = row["standard_category"].strip()
            if standard not in by_value:
                raise SchemaError(
                    f"{path}: unknown standard category {standard!r} "
                    f"(expected one of {sorted(by_value)})"
                )
            table[row["raw_type"].strip()] = by_value[standard]
    return CategoryMapping(table)


def load_geo_grouping(path: str | Path) -> dict[str, GeoGroup]:
    groups: dict[str, GeoGroup] = {}
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, ("state", "coastal", "census_region"), path)
        for row in reader:
            state = row["state"].strip().upper()
            coastal_raw = row["coastal"].strip().lower()
            if coastal_raw not in ("true", "false", "1", "0"):
                raise SchemaError(f"{path}: bad coastal flag {row['coastal']!r} for {state}")
            region = row["census_region"].strip()
            if region not in CENSUS_REGIONS:
                raise SchemaError(f"{path}: bad census region {region!r} for {state}")
            groups[state] = GeoGroup(state, coastal_raw in ("true", "1"), region)
    return groups


def classify_region(state: str, grouping: dict[str, GeoGroup]) -> GeoGroup:
    try:
        return grouping[state.upper()]
    except KeyError:
        raise UnknownStateError(state) from None


def parse_outage_csv(path: str | Path, mapping: CategoryMapping) -> IngestResult:
    """Parse the canonical outage CSV, collecting malformed rows instead of dropping them.

    Output records are sorted by (start_time, event_id) so the result does not
    depend on input order or any chunked/parallel ingestion strategy.
    """
    records: list[OutageRecord] = []
    rejects: list[RejectedRow] = []
    flagged = 0
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, CSV_COLUMNS, path)
        for line_number, row in enumerate(reader, start=2):
            try:
                record, was_flagged = _parse_row(row, mapping)
            except _RowError as err:
                rejects.append(RejectedRow(line_number, str(err), dict(row)))
                continue
            records.append(record)
            flagged += was_flagged
    records.sort(key=lambda r: (r.start_time, r.event_id))
    return IngestResult(records, rejects, flagged)


def filter_study_window(records: list[OutageRecord]) -> list[OutageRecord]:
    """Keep records whose start year falls in the 2015..2023 study window."""
    return [r for r in records if STUDY_START_YEAR <= r.year <= STUDY_END_YEAR]


def write_clean_records(records: list[OutageRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CLEAN_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.event_id,
                    r.raw_event_type,
                    r.category.value,
                    r.state,
                    _format_ts(r.start_time),
                    _format_ts(r.end_time),
                    repr(r.duration_minutes),
                    "" if r.max_customers is None else r.max_customers,
                    r.year,
                    int(r.flagged),
                ]
            )


def load_clean_records(path: str | Path) -> list[OutageRecord]:
    by_value = {c.value: c for c in EventCategory}
    records = []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, CLEAN_COLUMNS, path)
        for row in reader:
            records.append(
                OutageRecord(
                    event_id=row["event_id"],
                    raw_event_type=row["raw_event_type"],
                    category=by_value[row["category"]],
                    state=row["state"],
                    start_time=_parse_ts(row["start_time"]),
                    end_time=_parse_ts(row["end_time"]),
                    duration_minutes=float(row["duration_minutes"]),
                    max_customers=int(row["max_customers"]) if row["max_customers"] else None,
                    year=int(row["year"]),
                    flagged=row["flagged"] == "1",
                )
            )
    return records


CLEAN_COLUMNS = (
    "event_id",
    "raw_event_type",
    "category",
    "state",
    "start_time",
    "end_time",
    "duration_minutes",
    "max_customers",
    "year",
    "flagged",
)


class _RowError(ValueError):
    pass


def _parse_row(row: dict[str, str], mapping: CategoryMapping) -> tuple[OutageRecord, bool]:
    event_id = (row.get("event_id") or "").strip()
    if not event_id:
        raise _RowError("missing event_id")

    state = (row.get("state") or "").strip().upper()
    if len(state) != 2 or not state.isalpha():
        raise _RowError(f"invalid state code {row.get('state')!r}")

    start_raw = (row.get("start_time") or "").strip()
    if not start_raw:
        raise _RowError("missing start_time")
    try:
        start = _parse_ts(start_raw)
    except ValueError:
        raise _RowError(f"unparseable start_time {start_raw!r}") from None

    end_raw = (row.get("end_time") or "").strip()
    duration_raw = (row.get("duration_minutes") or "").strip()
    end = None
    if end_raw:
        try:
            end = _parse_ts(end_raw)
        except ValueError:
            raise _RowError(f"unparseable end_time {end_raw!r}") from None

    duration_given = None
    if duration_raw:
        try:
            duration_given = float(duration_raw)
        except ValueError:
            raise _RowError(f"unparseable duration {duration_raw!r}") from None
        if duration_given < 0:
            raise _RowError("negative duration")

    if end is None and duration_given is None:
        raise _RowError("missing end_time and duration")

    flagged = False
    if end is not None:
        duration = (end - start).total_seconds() / 60.0
        if duration < 0:
            raise _RowError("negative duration")
        # when both are given, timestamps win; a >1 minute mismatch is flagged
        if duration_given is not None and abs(duration_given - duration) > 1.0:
            flagged = True
    else:
        duration = duration_given
        end = start + timedelta(minutes=duration)

    customers_raw = (row.get("max_customers") or "").strip()
    customers = None
    if customers_raw:
        try:
            customers = int(float(customers_raw))
        except ValueError:
            raise _RowError(f"unparseable max_customers {customers_raw!r}") from None
        if customers < 0:
            raise _RowError("negative max_customers")

    category = mapping.standardize(row.get("raw_event_type") or "")
    record = OutageRecord(
        event_id=event_id,
        raw_event_type=(row.get("raw_event_type") or "").strip(),
        category=category,
        state=state,
        start_time=start,
        end_time=end,
        duration_minutes=duration,
        max_customers=customers,
        year=start.year,
        flagged=flagged,
    )
    return record, flagged


def _parse_ts(raw: str) -> datetime:
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _format_ts(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _require_columns(fieldnames, required, path) -> None:
    present = set(fieldnames or ())
    for column in required:
        if column not in present:
            raise SchemaError(f"{path}: missing required column {column!r}")

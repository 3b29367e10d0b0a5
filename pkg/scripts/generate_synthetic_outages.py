#!/usr/bin/env python3
"""Generate a synthetic outage CSV shaped like the canonical input schema.

The generated data carries a rising climate-event trend, a coastal severity
premium, and a sprinkling of malformed rows, so every pipeline stage has
something meaningful to chew on. Useful for demos and for exercising the CLI
without access to a real national outage extract.
"""

import argparse
import csv
import random
from datetime import datetime, timedelta, timezone

COASTAL = ["TX", "FL", "CA", "MI", "NC", "NY", "LA", "WA", "NJ", "VA"]
INLAND = ["CO", "KS", "MO", "TN", "NV", "OK", "AZ", "KY"]

RAW_TYPES = [
    ("Severe Weather", 0.44),
    ("Thunderstorm", 0.08),
    ("Winter Storm", 0.12),
    ("Hurricane", 0.04),
    ("Wildfire", 0.04),
    ("Equipment Failure", 0.16),
    ("Vandalism", 0.08),
    ("Public Appeal", 0.04),
]


def generate(n, seed, reject_fraction=0.005):
    rng = random.Random(seed)
    raw_types = [t for t, _ in RAW_TYPES]
    weights = [w for _, w in RAW_TYPES]
    rows = []
    for i in range(n):
        # upward trend: later years draw more events
        year = rng.choices(range(2015, 2024), weights=range(4, 13))[0]
        start = datetime(
            year, rng.randint(1, 12), rng.randint(1, 28),
            rng.randint(0, 23), rng.randint(0, 59), tzinfo=timezone.utc,
        )
        duration = round(rng.lognormvariate(4.6, 1.1), 1)
        state = rng.choice(COASTAL + INLAND)
        scale = 1.8 if state in COASTAL else 1.0
        customers = int(rng.lognormvariate(7.2, 1.4) * scale)
        row = {
            "event_id": f"ev{i:06d}",
            "raw_event_type": rng.choices(raw_types, weights=weights)[0],
            "state": state,
            "start_time": start.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "end_time": (start + timedelta(minutes=duration)).strftime("%Y-%m-%dT%H:%M:%SZ"),
            "duration_minutes": str(duration),
            "max_customers": str(customers),
        }
        if rng.random() < reject_fraction:
            row["start_time"] = "not-a-timestamp"
        rows.append(row)
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("output", help="where to write the CSV")
    parser.add_argument("-n", type=int, default=20000, help="number of rows")
    parser.add_argument("--seed", type=int, default=20250809)
    args = parser.parse_args()

    rows = generate(args.n, args.seed)
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=[
                "event_id", "raw_event_type", "state", "start_time",
                "end_time", "duration_minutes", "max_customers",
            ],
        )
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.output}")


if __name__ == "__main__":
    main()

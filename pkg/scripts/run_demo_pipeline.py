#!/usr/bin/env python3
"""End-to-end demo: synthesize outage data, then run every pipeline stage.

Writes a config pointing at the synthetic CSV and the packaged defaults,
invokes the CLI in-process, and leaves all artifacts under the chosen
output directory.
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))
from generate_synthetic_outages import generate  # noqa: E402

from gridcascade.cli import main as cli_main  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="demo_run", help="where everything lands")
    parser.add_argument("-n", type=int, default=20000, help="synthetic rows")
    parser.add_argument("--seed", type=int, default=20250809)
    args = parser.parse_args()

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    csv_path = workdir / "synthetic_outages.csv"

    import csv as csv_module

    rows = generate(args.n, args.seed)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv_module.DictWriter(
            fh,
            fieldnames=[
                "event_id", "raw_event_type", "state", "start_time",
                "end_time", "duration_minutes", "max_customers",
            ],
        )
        writer.writeheader()
        writer.writerows(rows)

    config = workdir / "pipeline_config.json"
    config.write_text(
        json.dumps(
            {
                "out_dir": str(workdir / "out"),
                "seed": 0,
                "alpha": 0.05,
                "major_outage_threshold": 50000,
                "train_fraction": 0.8,
                "l2_lambda": 1.0,
                "paths": {"outage_csv": str(csv_path)},
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    status = cli_main(["--config", str(config), "run", "--stages", "all"])
    if status == 0:
        print(f"\nartifacts in {workdir / 'out'}")
        print(f"resilience table: {workdir / 'out' / 'resilience_report.txt'}")
    return status


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""
Load a written experiment report (CSV plus metadata JSON) into the results database.
Non-destructive: every invocation adds a new run.

Usage: python scripts/record_report.py REPORT.csv [METADATA.json]
"""
import os
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from dotenv import load_dotenv

from db import ResultsDB
from errors import SieveLabError
from experiment import metadata_path_for, read_report

load_dotenv()


def main():
    """Record a report file as a completed run."""
    if len(sys.argv) < 2:
        print("Usage: python scripts/record_report.py REPORT.csv [METADATA.json]")
        sys.exit(2)

    csv_path = sys.argv[1]
    metadata_path = sys.argv[2] if len(sys.argv) > 2 else metadata_path_for(csv_path)

    for path in (csv_path, metadata_path):
        if not os.path.exists(path):
            print(f"ERROR: File not found: {path}")
            sys.exit(1)

    try:
        report = read_report(csv_path, metadata_path)
    except (SieveLabError, ValueError) as e:
        print(f"ERROR: Could not read report: {e}")
        sys.exit(1)

    config = report.metadata.get("config", {})
    db = ResultsDB()
    run_id = db.record_report(config, report)

    print(f"Recorded {len(report.rows)} rows as run {run_id} in {db.db_url}")
    for row in db.get_run_rows(run_id):
        print(f"  x={row.x}  lhs={row.lhs!r}  fitted_D={row.fitted_D!r}  violations={row.majorant_violations}")


if __name__ == "__main__":
    main()

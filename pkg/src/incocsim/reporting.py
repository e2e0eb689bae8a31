"""Report serialization: JSON with config, per-request rows and aggregates,
plus a CSV view of the per-request rows. Row field order is fixed so
json -> csv -> json round-trips losslessly.
"""

from __future__ import annotations

import csv
import io
import json

from .config import RunConfig
from .engine import Report

ROW_FIELDS = ("req_id", "core", "op", "memtype", "issue", "complete", "latency")


def report_dict(report: Report, config: RunConfig) -> dict:
    return {
        "config": config.to_dict(),
        "measure_from": report.measure_from,
        "per_request": [r.row() for r in report.per_request],
        "aggregates": report.aggregates(),
    }


def to_json(report: Report, config: RunConfig) -> str:
    return json.dumps(report_dict(report, config), indent=2, sort_keys=False) + "\n"


def rows_to_csv(rows: list[dict]) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=ROW_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row[k] for k in ROW_FIELDS})
    return out.getvalue()


def to_csv(report: Report, config: RunConfig) -> str:
    return rows_to_csv([r.row() for r in report.per_request])


def rows_from_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != ROW_FIELDS:
        raise ValueError(
            f"csv header must be {','.join(ROW_FIELDS)}")
    rows = []
    for row in reader:
        rows.append({
            "req_id": int(row["req_id"]),
            "core": int(row["core"]),
            "op": row["op"],
            "memtype": row["memtype"],
            "issue": int(row["issue"]),
            "complete": int(row["complete"]),
            "latency": int(row["latency"]),
        })
    return rows


def load_json(text: str) -> dict:
    doc = json.loads(text)
    for key in ("config", "per_request", "aggregates"):
        if key not in doc:
            raise ValueError(f"report is missing the {key!r} section")
    return doc

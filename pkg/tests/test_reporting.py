import json

import pytest

from incocsim.config import RunConfig
from incocsim.engine import Report, RequestResult
from incocsim.memory import MemoryType
from incocsim.protocol import Op
from incocsim.reporting import (
    ROW_FIELDS,
    load_json,
    rows_from_csv,
    rows_to_csv,
    to_csv,
    to_json,
)


def _report():
    return Report(per_request=[
        RequestResult(0, 1, Op.STORE, MemoryType.NORMAL_CACHEABLE,
                      issue=0, complete=553, inject=0),
        RequestResult(1, 0, Op.LOAD, MemoryType.INC_OC,
                      issue=100, complete=449, inject=100),
    ], measure_from=50)


def test_json_sections_and_stability():
    text = to_json(_report(), RunConfig())
    doc = json.loads(text)
    assert set(doc) == {"config", "measure_from", "per_request", "aggregates"}
    assert doc["per_request"][0]["latency"] == 553
    assert text == to_json(_report(), RunConfig())  # byte stable


def test_empty_report_csv_is_header_only():
    assert to_csv(Report(), RunConfig()) == ",".join(ROW_FIELDS) + "\n"


def test_csv_rows():
    csv_text = to_csv(_report(), RunConfig())
    lines = csv_text.strip().split("\n")
    assert len(lines) == 3
    assert lines[1] == "0,1,W,normal,0,553,553"
    assert lines[2] == "1,0,R,incoc,100,449,349"


def test_json_csv_json_round_trip_lossless():
    doc = json.loads(to_json(_report(), RunConfig()))
    rows = rows_from_csv(rows_to_csv(doc["per_request"]))
    assert rows == doc["per_request"]


def test_csv_header_enforced():
    with pytest.raises(ValueError):
        rows_from_csv("nope,fields\n1,2\n")


def test_load_json_requires_sections():
    with pytest.raises(ValueError):
        load_json(json.dumps({"per_request": []}))

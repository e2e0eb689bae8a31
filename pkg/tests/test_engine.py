import pytest

from incocsim.engine import (
    Engine,
    LatencyConfig,
    Report,
    RequestResult,
    _bucket,
)
from incocsim.memory import MemoryType
from incocsim.protocol import Op


def test_events_fire_in_tick_then_insertion_order():
    eng = Engine()
    seen = []
    eng.schedule(5, seen.append, "b")
    eng.schedule(2, seen.append, "a")
    eng.schedule(5, seen.append, "c")
    eng.schedule(0, lambda: eng.schedule(3, seen.append, "d"))
    eng.run()
    assert seen == ["a", "d", "b", "c"]
    assert eng.now == 5


def test_tick_hooks_run_once_per_active_tick():
    eng = Engine()
    ticks = []
    eng.tick_hooks.append(ticks.append)
    for delay in (3, 3, 3, 7):
        eng.schedule(delay, lambda: None)
    eng.run()
    assert ticks == [3, 7]


def test_log_transition_format():
    eng = Engine(log_enabled=True)
    eng.schedule(11, eng.log_transition, "l1.2", 0x1040, "SelfStore", "S", "SM_D")
    eng.run()
    assert eng.log == ["tick=11 comp=l1.2 line=0x1040 ev=SelfStore st=S->SM_D"]


def test_log_disabled_by_default():
    eng = Engine()
    eng.log_transition("l2", 0, "Evict", "normal", "evicting")
    assert eng.log == []


def test_latency_validation():
    LatencyConfig().validate()
    with pytest.raises(ValueError):
        LatencyConfig(l2_proc=0).validate()
    with pytest.raises(ValueError):
        LatencyConfig(queue_issue=-3).validate()


def _result(req_id, core, lat, issue=100, mem=MemoryType.NORMAL_CACHEABLE,
            inject=100):
    return RequestResult(req_id=req_id, core=core, op=Op.STORE, mem_type=mem,
                         issue=issue, complete=issue + lat, inject=inject)


def test_bucket_boundaries():
    assert _bucket(0) == "0"
    assert _bucket(1) == "1"
    assert _bucket(729) == "512"
    assert _bucket(1024) == "1024"


def test_aggregates_and_measure_window():
    rep = Report(per_request=[
        _result(0, 0, 4, issue=0, inject=0),        # warmup, excluded
        _result(1, 0, 729),
        _result(2, 1, 349, mem=MemoryType.INC_OC),
    ], measure_from=50)
    agg = rep.aggregates()
    assert agg["overall"]["count"] == 2
    assert agg["overall"]["max"] == 729
    assert agg["per_core"]["0"]["mean"] == 729
    assert agg["per_memtype"]["incoc"]["count"] == 1
    assert agg["all_complete"] == 829
    assert agg["first_complete"] == 449


def test_measured_filters_on_inject_not_issue():
    # a blocked core can issue a warmup record after the window opens
    late_warm = _result(0, 0, 10, issue=80, inject=0)
    rep = Report(per_request=[late_warm, _result(1, 0, 5)], measure_from=50)
    assert [r.req_id for r in rep.measured()] == [1]


def test_row_has_exactly_the_serialized_fields():
    row = _result(7, 3, 42).row()
    assert list(row) == ["req_id", "core", "op", "memtype",
                         "issue", "complete", "latency"]
    assert row["latency"] == 42
    assert row["op"] == "W"

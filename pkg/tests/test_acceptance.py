"""Acceptance gate: one test per acceptance criterion, each printing a
single PASS/FAIL line with the measured figures."""

import itertools
import random
import sys
import time

import pytest

from incocsim.config import RunConfig
from incocsim.machine import run_trace
from incocsim.memory import MemoryType
from incocsim.protocol import (
    CoherenceEvent, MSIState, ProtocolViolation, l1_next, legal_pairs,
)
from incocsim.traces import (
    Trace, TraceRecord, gen_dirty_miss, gen_micro, gen_producer_consumer,
    gen_write_storm,
)
from incocsim.protocol import Op
from incocsim.verify import run_verification

NORMAL = MemoryType.NORMAL_CACHEABLE
INCOC = MemoryType.INC_OC


def _verdict(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


def _dirty_miss(mem_type):
    trace, n = gen_dirty_miss(mem_type)
    report = run_trace(trace, RunConfig(n_cores=n))
    return report.measured()[0]


def test_criterion_1_dirty_miss_timeline():
    t0 = time.monotonic()
    r = _dirty_miss(NORMAL)
    elapsed = time.monotonic() - t0
    marks = (r.l1_action - r.issue, r.l2_receipt - r.issue, r.latency)
    ok = marks == (4, 128, 729) and elapsed < 1.0
    _verdict(1, ok, f"dirty-miss marks l1/l2/complete = {marks}, "
                    f"expected (4, 128, 729), {elapsed:.2f}s")


def test_criterion_2_incoc_dirty_miss_reduction():
    normal = _dirty_miss(NORMAL).latency
    incoc = _dirty_miss(INCOC).latency
    ratio = incoc / normal
    ok = 0.40 <= ratio <= 0.48
    _verdict(2, ok, f"incoc/normal dirty miss = {incoc}/{normal} = "
                    f"{ratio:.4f}, window [0.40, 0.48]")


def test_criterion_3_write_storm_reduction():
    t0 = time.monotonic()
    spans = {}
    for mt in (NORMAL, INCOC):
        trace, n = gen_write_storm(4, mt)
        report = run_trace(trace, RunConfig(n_cores=n))
        spans[mt] = report.all_complete_tick() - trace.measure_from
    elapsed = time.monotonic() - t0
    ratio = spans[INCOC] / spans[NORMAL]
    ok = 0.21 <= ratio <= 0.30 and elapsed < 1.0
    _verdict(3, ok, f"4-core storm all-complete incoc/normal = "
                    f"{spans[INCOC]}/{spans[NORMAL]} = {ratio:.4f}, "
                    f"window [0.21, 0.30], {elapsed:.2f}s")


def test_criterion_4_microbenchmark_directions():
    t0 = time.monotonic()
    means = {}
    counts = []
    for kind in ("lock", "load", "store"):
        for mt in (NORMAL, INCOC):
            trace, n = gen_micro(kind, "shared", mt, n_cores=4, iters=2500)
            report = run_trace(trace, RunConfig(n_cores=n))
            agg = report.aggregates()["overall"]
            means[kind, mt] = agg["mean"]
            counts.append(agg["count"])
    elapsed = time.monotonic() - t0
    directions = {
        "shared lock incoc < normal": means["lock", INCOC] < means["lock", NORMAL],
        "shared load incoc > normal": means["load", INCOC] > means["load", NORMAL],
        "shared store incoc > normal": means["store", INCOC] > means["store", NORMAL],
        "read-only shared normal < incoc": means["load", NORMAL] < means["load", INCOC],
    }
    ok = all(directions.values()) and min(counts) >= 10_000 and elapsed < 30.0
    detail = ", ".join(
        f"{name}: {'yes' if held else 'NO'}" for name, held in directions.items())
    _verdict(4, ok, f"{detail} (>= {min(counts)} ops each, {elapsed:.1f}s)")


def test_criterion_5_blind_vs_selective_typing():
    spans = {}
    for typing in ("normal", "selective", "blind"):
        trace, n = gen_producer_consumer(typing=typing)
        report = run_trace(trace, RunConfig(n_cores=n))
        spans[typing] = report.all_complete_tick() - trace.measure_from
    drift = abs(spans["selective"] - spans["normal"]) / spans["normal"]
    ok = spans["blind"] > spans["selective"] and drift <= 0.05
    _verdict(5, ok, f"pipeline runtimes normal/selective/blind = "
                    f"{spans['normal']}/{spans['selective']}/{spans['blind']}, "
                    f"selective drift {drift:.3f} (<= 0.05), blind slower: "
                    f"{spans['blind'] > spans['selective']}")


def test_criterion_6_property_suite():
    t0 = time.monotonic()
    n, violations = run_verification(n_traces=1000, seed=0)
    elapsed = time.monotonic() - t0
    ok = n == 1000 and not violations and elapsed < 120.0
    _verdict(6, ok, f"{n} random traces, {len(violations)} violations, "
                    f"{elapsed:.1f}s (< 120s)")


def test_criterion_7_protocol_table_coverage():
    legal = legal_pairs()
    covered = illegal = 0
    ok = True
    for pair in itertools.product(MSIState, CoherenceEvent):
        if pair in legal:
            l1_next(*pair)
            covered += 1
        else:
            try:
                l1_next(*pair)
                ok = False
            except ProtocolViolation:
                illegal += 1
    total = len(MSIState) * len(CoherenceEvent)
    ok = ok and covered + illegal == total
    _verdict(7, ok, f"{covered} legal pairs exercised, {illegal} illegal "
                    f"pairs raise, {total} total")


def test_criterion_8_incoc_latency_constancy():
    rng = random.Random(2024)
    base = 0x10000
    trace = Trace(regions=[(base, 0x1000, INCOC)])
    tick = 0
    # randomized prior write pattern over a few lines, no concurrent traffic
    per_core = {0: 0, 1: 0}
    for _ in range(40):
        core = rng.randrange(2)
        tick += 1000
        addr = base + rng.randrange(4) * 64 + rng.randrange(8) * 8
        per_core[core] = tick
        trace.records.append(TraceRecord(tick, core, Op.STORE, addr,
                                         rng.randrange(1 << 16)))
    trace.measure_from = tick + 5000
    for i in range(100):
        t = trace.measure_from + i * 1000
        addr = base + (i % 4) * 64 + (i % 8) * 8
        trace.records.append(TraceRecord(t, i % 2, Op.LOAD, addr))
    report = run_trace(trace, RunConfig(n_cores=2))
    lats = [r.latency for r in report.measured()]
    spread = max(lats) - min(lats)
    ok = len(lats) == 100 and spread == 0
    _verdict(8, ok, f"100 incoc loads, latency {min(lats)} ticks each, "
                    f"spread {spread} (must be 0)")

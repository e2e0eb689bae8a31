"""Deterministic discrete-event core: tick counter, event queue, latencies,
and per-run statistics.

Events fire in (tick, sequence-number) order, so identical inputs always
replay identically. Ticks are integers and correspond to cycles.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, asdict

from .memory import MemoryType
from .protocol import Op


class SimulationFault(Exception):
    """A fault that aborts the run (protocol bug, deadlock, type mismatch)."""

    def __init__(self, message: str, event_log: list[str] | None = None):
        super().__init__(message)
        self.event_log = event_log or []


class Deadlock(SimulationFault):
    pass


class TypeMismatch(SimulationFault):
    """A request's memory type disagrees with the resident line's kind."""


@dataclass
class LatencyConfig:
    """Tick costs of the fixed-latency machine.

    The defaults are calibrated so that the canonical normal-memory dirty
    miss hits its three timeline marks exactly: the L1 acts at tick 4, the
    L2 receives the request at tick 128, and the write completes at tick
    729. tests/test_calibration.py re-derives them by brute-force search
    over the hop-sum equations.
    """

    l1_proc: int = 4
    l1_to_l2_hop: int = 97
    l2_proc: int = 70
    l2_to_l1_hop: int = 124
    dram_access: int = 200
    queue_issue: int = 27

    def validate(self) -> None:
        for name, value in asdict(self).items():
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"latency {name} must be an integer >= 1, got {value!r}")


class Engine:
    """Single-threaded event loop with a (tick, seq) ordered queue."""

    def __init__(self, log_enabled: bool = False):
        self.now = 0
        self._heap: list[tuple[int, int, object, tuple]] = []
        self._seq = 0
        self.log_enabled = log_enabled
        self.log: list[str] = []
        self.tick_hooks: list = []  # run after the last event of each active tick

    def schedule(self, delay: int, fn, *args) -> None:
        assert delay >= 0
        heapq.heappush(self._heap, (self.now + delay, self._seq, fn, args))
        self._seq += 1

    def log_transition(self, component: str, line: int, event: str,
                       st_from: str, st_to: str) -> None:
        if self.log_enabled:
            self.log.append(
                f"tick={self.now} comp={component} line={line:#x} "
                f"ev={event} st={st_from}->{st_to}"
            )

    def run(self) -> None:
        while self._heap:
            tick, _, fn, args = heapq.heappop(self._heap)
            self.now = tick
            fn(*args)
            if self.tick_hooks and (not self._heap or self._heap[0][0] > tick):
                for hook in self.tick_hooks:
                    hook(tick)


@dataclass
class RequestResult:
    req_id: int
    core: int
    op: Op
    mem_type: MemoryType
    issue: int
    complete: int
    inject: int = 0  # trace tick; issue may be later on a blocked core
    # extra instrumentation, not part of the serialized per_request row
    l1_action: int | None = None
    l2_receipt: int | None = None
    success: bool = True  # False only for a failed exclusive store

    @property
    def latency(self) -> int:
        return self.complete - self.issue

    def row(self) -> dict:
        return {
            "req_id": self.req_id,
            "core": self.core,
            "op": self.op.value,
            "memtype": self.mem_type.value,
            "issue": self.issue,
            "complete": self.complete,
            "latency": self.latency,
        }


def _bucket(latency: int) -> str:
    if latency <= 0:
        return "0"
    return str(1 << (latency.bit_length() - 1))


def _aggregate(results: list[RequestResult]) -> dict:
    if not results:
        return {"count": 0, "mean": 0.0, "max": 0, "histogram": {}}
    lats = [r.latency for r in results]
    hist: dict[str, int] = {}
    for lat in lats:
        key = _bucket(lat)
        hist[key] = hist.get(key, 0) + 1
    return {
        "count": len(lats),
        "mean": sum(lats) / len(lats),
        "max": max(lats),
        "histogram": dict(sorted(hist.items(), key=lambda kv: int(kv[0]))),
    }


@dataclass
class Report:
    """Per-request latencies plus recomputable aggregates for one run.

    measure_from filters warm-up records out of the aggregates (requests
    injected before that tick are kept in per_request but not aggregated
    unless include_warmup is chosen by the caller).
    """

    per_request: list[RequestResult] = field(default_factory=list)
    measure_from: int = 0
    event_log: list[str] = field(default_factory=list)

    def measured(self) -> list[RequestResult]:
        return [r for r in self.per_request if r.inject >= self.measure_from]

    def aggregates(self) -> dict:
        measured = self.measured()
        per_core: dict[str, dict] = {}
        for core in sorted({r.core for r in measured}):
            per_core[str(core)] = _aggregate([r for r in measured if r.core == core])
        per_type: dict[str, dict] = {}
        for mt in sorted({r.mem_type.value for r in measured}):
            per_type[mt] = _aggregate([r for r in measured if r.mem_type.value == mt])
        return {
            "overall": _aggregate(measured),
            "per_core": per_core,
            "per_memtype": per_type,
            "first_complete": self.first_complete_tick(),
            "all_complete": self.all_complete_tick(),
        }

    def all_complete_tick(self) -> int:
        measured = self.measured()
        return max((r.complete for r in measured), default=0)

    def first_complete_tick(self) -> int:
        measured = self.measured()
        return min((r.complete for r in measured), default=0)

"""Whole-machine assembly: cores, L1s, the shared L2 and the memory model,
driven by a trace. Produces the per-run Report.

Cores are blocking: each issues its next record at max(inject tick,
previous completion). A failed exclusive store retries the load/store pair
after a short backoff, up to the configured limit; the retries are folded
into the original record's latency.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .config import RunConfig
from .engine import Deadlock, Engine, Report, RequestResult, SimulationFault
from .memory import MemoryModel, MemoryType
from .protocol import MSIState, Op, ProtocolViolation
from .l1 import L1Cache
from .l2 import L2Directory
from .traces import Trace, TraceRangeError


@dataclass
class _Request:
    req_id: int
    core: int
    op: Op
    addr: int
    value: int | None
    mem_type: MemoryType
    result: RequestResult


@dataclass(frozen=True)
class OpRecord:
    """One committed operation, in completion order; input to the value and
    monitor oracles."""
    tick: int
    core: int
    op: Op
    addr: int
    value: int | None
    mem_type: MemoryType
    success: bool


class _Core:
    def __init__(self, machine: "Machine", core_id: int):
        self.machine = machine
        self.core_id = core_id
        self.queue: deque = deque()
        self.current: _Request | None = None
        self.attempts = 0

    def start(self) -> None:
        self._schedule_next()

    def _schedule_next(self) -> None:
        if not self.queue:
            return
        rec = self.queue.popleft()
        delay = max(rec.inject_at - self.machine.engine.now, 0)
        self.machine.engine.schedule(delay, self._inject, rec)

    def _inject(self, rec) -> None:
        m = self.machine
        req_id = m.req_ids[id(rec)]
        result = RequestResult(
            req_id=req_id, core=self.core_id, op=rec.op,
            mem_type=m.mem.resolve_type(rec.addr),
            issue=m.engine.now, complete=-1, inject=rec.inject_at,
        )
        m.results.append(result)
        m.results_by_id[req_id] = result
        self.attempts = 0
        self.current = _Request(req_id, self.core_id, rec.op, rec.addr,
                                rec.value, result.mem_type, result)
        m.l1s[self.core_id].handle_core_request(self.current)

    def _retry(self) -> None:
        # re-run the load-exclusive so the monitor is armed again
        req = self.current
        lx = _Request(req.req_id, self.core_id, Op.LOAD_EXCL, req.addr,
                      None, req.mem_type, req.result)
        self.machine.l1s[self.core_id].handle_core_request(lx)

    def on_complete(self, req: _Request, success: bool) -> None:
        m = self.machine
        if req.op is Op.LOAD_EXCL and self.current.op is Op.STORE_EXCL:
            # the reload of a retrying exclusive pair finished; fire the store
            m.op_log.append(OpRecord(m.engine.now, self.core_id, req.op,
                                     req.addr, None, req.mem_type, success))
            m.l1s[self.core_id].handle_core_request(self.current)
            return

        if (req.op is Op.STORE_EXCL and not success
                and self.attempts < m.config.sx_retry_limit):
            self.attempts += 1
            m.op_log.append(OpRecord(m.engine.now, self.core_id, req.op,
                                     req.addr, req.value, req.mem_type, False))
            m.engine.schedule(m.config.latencies.queue_issue, self._retry)
            return

        req.result.complete = m.engine.now
        req.result.success = success
        m.op_log.append(OpRecord(m.engine.now, self.core_id, req.op, req.addr,
                                 req.value if req.op.is_store else None,
                                 req.mem_type, success))
        self.current = None
        self._schedule_next()


class Machine:
    def __init__(self, config: RunConfig, log_enabled: bool = False):
        config.validate()
        self.config = config
        self.engine = Engine(log_enabled=log_enabled)
        self.mem = MemoryModel(config.memory_size, config.page_size)
        self.l2 = L2Directory(config.l2, config.latencies, self.engine,
                              self._send_to_l1, config.remote_load_policy)
        self.l1s = [
            L1Cache(i, config.l1, config.latencies, self.engine,
                    self._send_to_l2, self._on_complete,
                    config.remote_load_policy)
            for i in range(config.n_cores)
        ]
        self.cores = [_Core(self, i) for i in range(config.n_cores)]
        self.results: list[RequestResult] = []
        self.results_by_id: dict[int, RequestResult] = {}
        self.req_ids: dict[int, int] = {}
        self.op_log: list[OpRecord] = []

    # --- interconnect -------------------------------------------------------

    def _send_to_l2(self, msg, delay: int) -> None:
        self.engine.schedule(delay, self._deliver_l2, msg)

    def _deliver_l2(self, msg) -> None:
        if msg.req_id is not None:
            result = self.results_by_id.get(msg.req_id)
            if result is not None and result.l2_receipt is None:
                result.l2_receipt = self.engine.now
        self.l2.deliver(msg)

    def _send_to_l1(self, core: int, msg, delay: int) -> None:
        self.engine.schedule(delay, self.l1s[core].deliver, msg)

    def _on_complete(self, req: _Request, success: bool) -> None:
        self.cores[req.core].on_complete(req, success)

    # --- run ------------------------------------------------------------------

    def run(self, trace: Trace) -> Report:
        needed = trace.n_cores_required()
        if needed > self.config.n_cores:
            raise TraceRangeError(
                None, f"trace uses {needed} cores, machine has {self.config.n_cores}")
        for base, length, mem_type in trace.regions:
            self.mem.declare_region(base, length, mem_type)
        for idx, rec in enumerate(trace.records):
            self.req_ids[id(rec)] = idx
            self.cores[rec.core].queue.append(rec)
        for core in self.cores:
            core.start()

        try:
            self.engine.run()
        except SimulationFault as exc:
            if not exc.event_log:
                exc.event_log = list(self.engine.log)
            raise
        except ProtocolViolation as exc:
            raise SimulationFault(str(exc), list(self.engine.log)) from exc

        self._check_quiescent()
        self.results.sort(key=lambda r: r.req_id)
        return Report(per_request=self.results,
                      measure_from=trace.measure_from,
                      event_log=list(self.engine.log))

    def _check_quiescent(self) -> None:
        stuck = [c.core_id for c in self.cores if c.current is not None or c.queue]
        if stuck:
            raise Deadlock(
                f"cores {stuck} never completed all requests",
                list(self.engine.log))
        if self.l2.busy or self.l2.parked or self.l2._ingress:
            raise SimulationFault(
                "L2 not quiescent at end of run", list(self.engine.log))
        for l1 in self.l1s:
            if l1.pending is not None or l1._parked is not None:
                raise SimulationFault(
                    f"L1 of core {l1.core_id} not quiescent", list(self.engine.log))
            for addr, state in l1.resident_lines():
                if state not in (MSIState.S, MSIState.M):
                    raise SimulationFault(
                        f"line {addr:#x} stuck in {state.value} in L1 "
                        f"of core {l1.core_id}", list(self.engine.log))

    # --- inspection (used by the verification oracles) -------------------------

    def residency_probe(self, base: int, length: int) -> bool:
        caches = [l1 for l1 in self.l1s] + [self.l2]
        for cache in caches:
            for addr, _ in cache.resident_lines():
                if base <= addr < base + length:
                    return True
        return False

    def visible_word(self, addr: int) -> int:
        """The value a fresh coherent load of `addr` would observe."""
        line = addr - addr % self.config.l1.line_size
        offset = addr - line
        for l1 in self.l1s:
            ln = l1.lookup(line)
            if ln is not None and ln.state is MSIState.M:
                return ln.data.get(offset, 0)
        entry = self.l2.lookup(line)
        if entry is not None:
            return entry.data.get(offset, 0)
        return self.l2.dram.get(line, {}).get(offset, 0)


def run_trace(trace: Trace, config: RunConfig | None = None,
              log_enabled: bool = False) -> Report:
    """One-shot convenience wrapper: build a machine sized for the trace."""
    if config is None:
        config = RunConfig()
    if trace.n_cores_required() > config.n_cores:
        config.n_cores = trace.n_cores_required()
    machine = Machine(config, log_enabled=log_enabled)
    return machine.run(trace)

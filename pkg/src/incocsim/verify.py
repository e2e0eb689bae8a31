"""Invariant checking over live runs and randomized traces.

Checked invariants:
  swmr         at most one Modified copy of a line; never Modified + Shared
  inclusion    every stable L1 line is present in the L2
  exclusion    INC-OC lines never appear in any L1
  monitor      exclusive-store success discipline (strict iff for INC-OC,
               success implies no intervening store for normal memory)
  memory       final hierarchy contents equal a flat reference replay
  determinism  a repeat run is byte-identical

The tick-level checks run as engine hooks after the last event of every
active tick; the rest run on the finished machine.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .config import RunConfig
from .engine import Report
from .l1 import L1Config
from .l2 import L2Config
from .machine import Machine
from .memory import MemoryType
from .protocol import MSIState, Op
from .reporting import to_json
from .traces import Trace, TraceRecord


@dataclass(frozen=True)
class Violation:
    invariant: str
    detail: str

    def __str__(self):
        return f"[{self.invariant}] {self.detail}"


def install_tick_checks(machine: Machine, violations: list[Violation]) -> None:
    """Register SWMR / inclusion / INC-OC exclusion checks on every tick."""

    def check(tick: int) -> None:
        owners: dict[int, list[int]] = {}
        sharers: dict[int, list[int]] = {}
        for l1 in machine.l1s:
            for addr, state in l1.resident_lines():
                if machine.mem.resolve_type(addr) is MemoryType.INC_OC:
                    violations.append(Violation(
                        "exclusion",
                        f"tick {tick}: INC-OC line {addr:#x} cached in L1 "
                        f"of core {l1.core_id} ({state.value})"))
                if state is MSIState.M:
                    owners.setdefault(addr, []).append(l1.core_id)
                elif state is MSIState.S:
                    sharers.setdefault(addr, []).append(l1.core_id)
                if state in (MSIState.S, MSIState.M):
                    if machine.l2.lookup(addr) is None:
                        violations.append(Violation(
                            "inclusion",
                            f"tick {tick}: line {addr:#x} is {state.value} in L1 "
                            f"of core {l1.core_id} but absent from the L2"))
        for addr, cores in owners.items():
            if len(cores) > 1:
                violations.append(Violation(
                    "swmr", f"tick {tick}: line {addr:#x} Modified in cores {cores}"))
            if addr in sharers:
                violations.append(Violation(
                    "swmr", f"tick {tick}: line {addr:#x} Modified in core "
                            f"{cores[0]} and Shared in cores {sharers[addr]}"))

    machine.engine.tick_hooks.append(check)


def check_monitors(machine: Machine, violations: list[Violation]) -> None:
    """Replay the completion-ordered operation log against reference
    exclusive monitors."""
    line = lambda a: a - a % machine.config.l1.line_size
    armed: dict[tuple[int, int], bool] = {}  # (core, line) -> monitor armed
    last_lx: dict[tuple[int, int], int] = {}
    store_ticks: dict[int, list[tuple[int, int]]] = {}  # line -> [(tick, core)]

    for rec in machine.op_log:
        if rec.mem_type is MemoryType.UNCACHEABLE:
            continue  # LL/SC degrades to plain load/store on uncacheable pages
        key = (rec.core, line(rec.addr))
        if rec.mem_type is MemoryType.INC_OC:
            if rec.op is Op.LOAD_EXCL:
                armed[key] = True
            elif rec.op is Op.STORE_EXCL:
                expected = armed.pop(key, False)
                if rec.success != expected:
                    violations.append(Violation(
                        "monitor",
                        f"tick {rec.tick}: core {rec.core} StoreExcl to "
                        f"{rec.addr:#x} {'succeeded' if rec.success else 'failed'}"
                        f" but the monitor was {'armed' if expected else 'clear'}"))
            if rec.op.is_store and rec.success:
                for k in list(armed):
                    if k[1] == line(rec.addr):
                        del armed[k]
        else:
            if rec.op is Op.LOAD_EXCL:
                last_lx[key] = rec.tick
            elif rec.op is Op.STORE_EXCL and rec.success:
                since = last_lx.get(key)
                if since is None:
                    violations.append(Violation(
                        "monitor",
                        f"tick {rec.tick}: core {rec.core} StoreExcl success "
                        f"with no prior LoadExcl"))
                else:
                    others = [t for t, c in store_ticks.get(line(rec.addr), ())
                              if since < t < rec.tick and c != rec.core]
                    if others:
                        violations.append(Violation(
                            "monitor",
                            f"tick {rec.tick}: core {rec.core} StoreExcl to "
                            f"{rec.addr:#x} succeeded across foreign stores "
                            f"at ticks {others}"))
        if rec.op.is_store and rec.success:
            store_ticks.setdefault(line(rec.addr), []).append((rec.tick, rec.core))


def check_final_memory(machine: Machine, violations: list[Violation]) -> None:
    """Compare the hierarchy's visible contents with a flat replay of every
    committed store in completion order."""
    reference: dict[int, int] = {}
    for rec in machine.op_log:
        if rec.op.is_store and rec.success:
            reference[rec.addr] = rec.value
    for addr, want in sorted(reference.items()):
        got = machine.visible_word(addr)
        if got != want:
            violations.append(Violation(
                "memory", f"addr {addr:#x}: hierarchy holds {got:#x}, "
                          f"flat reference holds {want:#x}"))


def run_checked(trace: Trace, config: RunConfig) -> tuple[Report, list[Violation]]:
    violations: list[Violation] = []
    machine = Machine(config, log_enabled=True)
    install_tick_checks(machine, violations)
    report = machine.run(trace)
    check_monitors(machine, violations)
    check_final_memory(machine, violations)
    return report, violations


def check_determinism(trace: Trace, config: RunConfig,
                      violations: list[Violation]) -> Report:
    first = Machine(config, log_enabled=True).run(trace)
    second = Machine(config, log_enabled=True).run(trace)
    if to_json(first, config) != to_json(second, config):
        violations.append(Violation("determinism", "repeat run report differs"))
    if first.event_log != second.event_log:
        violations.append(Violation("determinism", "repeat run event log differs"))
    return first


# --- randomized traces -------------------------------------------------------

def small_config(n_cores: int = 4) -> RunConfig:
    """A deliberately tiny hierarchy so random traces hit every eviction and
    recall path."""
    return RunConfig(
        n_cores=n_cores,
        l1=L1Config(size=1024, associativity=2, line_size=64),   # 8 sets
        l2=L2Config(size=4096, associativity=2, line_size=64),   # 32 sets
    )


def random_trace(rng: random.Random, n_cores: int = 4,
                 n_records: int = 40) -> Trace:
    page = 4096
    types = [MemoryType.NORMAL_CACHEABLE, MemoryType.NORMAL_CACHEABLE,
             MemoryType.INC_OC, MemoryType.UNCACHEABLE]
    rng.shuffle(types)
    trace = Trace()
    lines: list[int] = []
    for i, mem_type in enumerate(types):
        base = 0x10000 + i * page
        trace.regions.append((base, page, mem_type))
        # a handful of lines per region, concentrated to force conflicts
        lines += [base + k * 64 for k in (0, 1, 2, 8, 16)]

    ticks = {core: 0 for core in range(n_cores)}
    ops = [Op.LOAD, Op.LOAD, Op.STORE, Op.STORE, Op.LOAD_EXCL, Op.STORE_EXCL]
    for i in range(n_records):
        core = rng.randrange(n_cores)
        ticks[core] += rng.choice((0, 0, 40, 400, 2000))
        op = rng.choice(ops)
        addr = rng.choice(lines) + rng.randrange(8) * 8
        value = rng.randrange(1 << 16) if op.is_store else None
        trace.records.append(TraceRecord(ticks[core], core, op, addr, value))
    trace.records.sort(key=lambda r: (r.inject_at, r.core))
    return trace


def run_verification(n_traces: int = 1000, seed: int = 0,
                     n_cores: int | None = None) -> tuple[int, list[Violation]]:
    """Run `n_traces` random traces under the full invariant suite.
    Returns (traces run, violations found). Core counts mix 2 to 4 unless
    pinned."""
    rng = random.Random(seed)
    violations: list[Violation] = []
    for i in range(n_traces):
        cores = n_cores if n_cores is not None else rng.randint(2, 4)
        trace = random_trace(rng, n_cores=cores)
        config = small_config(cores)
        found: list[Violation] = []
        try:
            _, found = run_checked(trace, config)
            check_determinism(trace, small_config(cores), found)
        except Exception as exc:  # a fault is itself a verification failure
            found.append(Violation("fault", f"{type(exc).__name__}: {exc}"))
        for v in found:
            violations.append(Violation(v.invariant, f"trace {i}: {v.detail}"))
    return n_traces, violations

"""Trace file format and canned scenario generators.

Grammar, one record per line:

    #region <hexbase> <hexlen> <normal|incoc|uncacheable>
    #measure_from <decimal tick>
    <tick>,<core>,<R|W|LX|SX>,<hexaddr>[,<hexvalue>]

Any other line starting with ``#`` is a comment. Ticks are decimal and must
be non-decreasing per core; addresses and values are hexadecimal with an
optional 0x prefix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .memory import MemoryType
from .protocol import Op


class TraceError(Exception):
    def __init__(self, lineno: int | None, message: str):
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(f"{where}{message}")
        self.lineno = lineno


class TraceSyntaxError(TraceError):
    pass


class TraceRangeError(TraceError):
    pass


class TraceOrderError(TraceError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    inject_at: int
    core: int
    op: Op
    addr: int
    value: int | None = None


@dataclass
class Trace:
    regions: list[tuple[int, int, MemoryType]] = field(default_factory=list)
    records: list[TraceRecord] = field(default_factory=list)
    measure_from: int = 0

    def n_cores_required(self) -> int:
        return 1 + max((r.core for r in self.records), default=0)


_TYPE_NAMES = {"normal": MemoryType.NORMAL_CACHEABLE,
               "incoc": MemoryType.INC_OC,
               "uncacheable": MemoryType.UNCACHEABLE}
_TYPE_BY_VALUE = {v: k for k, v in _TYPE_NAMES.items()}
_OPS = {op.value: op for op in Op}


def _parse_int(token: str, base: int, what: str, lineno: int) -> int:
    try:
        value = int(token, base)
    except ValueError:
        raise TraceSyntaxError(lineno, f"bad {what}: {token!r}") from None
    if value < 0:
        raise TraceSyntaxError(lineno, f"{what} must be non-negative: {token!r}")
    return value


def parse_trace(text: str, memory_size: int | None = None,
                n_cores: int | None = None) -> Trace:
    trace = Trace()
    last_tick: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = line.split()
            if fields[0] == "#region":
                if len(fields) != 4:
                    raise TraceSyntaxError(
                        lineno, "#region takes <hexbase> <hexlen> <type>")
                base = _parse_int(fields[1], 16, "region base", lineno)
                length = _parse_int(fields[2], 16, "region length", lineno)
                if length == 0:
                    raise TraceSyntaxError(lineno, "region length must be > 0")
                mem_type = _TYPE_NAMES.get(fields[3])
                if mem_type is None:
                    raise TraceSyntaxError(
                        lineno, f"unknown memory type {fields[3]!r}")
                if memory_size is not None and base + length > memory_size:
                    raise TraceRangeError(
                        lineno, f"region {base:#x}+{length:#x} exceeds memory size")
                trace.regions.append((base, length, mem_type))
            elif fields[0] == "#measure_from":
                if len(fields) != 2:
                    raise TraceSyntaxError(lineno, "#measure_from takes one tick")
                trace.measure_from = _parse_int(fields[1], 10, "tick", lineno)
            # any other # line is a comment
            continue

        fields = [f.strip() for f in line.split(",")]
        if len(fields) not in (4, 5):
            raise TraceSyntaxError(
                lineno, "expected tick,core,op,addr[,value]")
        tick = _parse_int(fields[0], 10, "tick", lineno)
        core = _parse_int(fields[1], 10, "core", lineno)
        op = _OPS.get(fields[2])
        if op is None:
            raise TraceSyntaxError(lineno, f"unknown op {fields[2]!r}")
        addr = _parse_int(fields[3], 16, "address", lineno)
        value = None
        if op.is_store:
            if len(fields) != 5:
                raise TraceSyntaxError(lineno, f"{op.value} record needs a value")
            value = _parse_int(fields[4], 16, "value", lineno)
        elif len(fields) == 5:
            raise TraceSyntaxError(lineno, f"{op.value} record takes no value")

        if n_cores is not None and core >= n_cores:
            raise TraceRangeError(
                lineno, f"core {core} out of range for a {n_cores}-core machine")
        if memory_size is not None and addr >= memory_size:
            raise TraceRangeError(lineno, f"address {addr:#x} out of range")
        if tick < last_tick.get(core, 0):
            raise TraceOrderError(
                lineno, f"inject ticks must be non-decreasing per core "
                        f"(core {core}: {tick} after {last_tick[core]})")
        last_tick[core] = tick
        trace.records.append(TraceRecord(tick, core, op, addr, value))
    return trace


def render_trace(trace: Trace) -> str:
    lines = []
    for base, length, mem_type in trace.regions:
        lines.append(f"#region {base:#x} {length:#x} {_TYPE_BY_VALUE[mem_type]}")
    if trace.measure_from:
        lines.append(f"#measure_from {trace.measure_from}")
    for r in trace.records:
        row = f"{r.inject_at},{r.core},{r.op.value},{r.addr:#x}"
        if r.op.is_store:
            row += f",{r.value:#x}"
        lines.append(row)
    return "\n".join(lines) + "\n"


# --- scenario generators ---------------------------------------------------
#
# Each generator returns (trace, n_cores). Warm-up records run before
# measure_from so aggregates only see the steady-state phase.

_PAGE = 4096
_WARM_GAP = 8192  # comfortably above any single-request latency


def _region_len(n_bytes: int) -> int:
    return (n_bytes + _PAGE - 1) // _PAGE * _PAGE


def gen_dirty_miss(mem_type: MemoryType = MemoryType.NORMAL_CACHEABLE,
                   n_cores: int = 2) -> tuple[Trace, int]:
    """One core writes a line another core holds dirty.

    The last core warms the line (dirty in its L1 for normal memory,
    resident in the L2 for INC-OC), then core 0 issues the measured write.
    With one core the measured write degenerates to a plain hit.
    """
    if n_cores < 1:
        raise ValueError("dirty miss needs at least one core")
    base = 0x100000
    addr = base
    trace = Trace(regions=[(base, _PAGE, mem_type)], measure_from=_WARM_GAP)
    trace.records = [
        TraceRecord(0, n_cores - 1, Op.STORE, addr, 0xA1),
        TraceRecord(_WARM_GAP, 0, Op.STORE, addr, 0xB2),
    ]
    return trace, n_cores


def gen_write_storm(n_cores: int,
                    mem_type: MemoryType = MemoryType.NORMAL_CACHEABLE,
                    ) -> tuple[Trace, int]:
    """n_cores cores write one shared line at the same tick.

    An extra core (id n_cores) warms the line so every storm write starts
    from the same remote-dirty state; with n_cores=1 this is exactly the
    dirty-miss scenario.
    """
    if n_cores < 1:
        raise ValueError("write storm needs at least one core")
    base = 0x100000
    addr = base
    warm_core = n_cores
    trace = Trace(regions=[(base, _PAGE, mem_type)], measure_from=_WARM_GAP)
    trace.records = [TraceRecord(0, warm_core, Op.STORE, addr, 0xA1)]
    for core in range(n_cores):
        trace.records.append(
            TraceRecord(_WARM_GAP, core, Op.STORE, addr, 0xC0 + core))
    return trace, n_cores + 1


def gen_micro(kind: str, sharing: str,
              mem_type: MemoryType = MemoryType.NORMAL_CACHEABLE,
              n_cores: int = 4, iters: int = 2500,
              ws_bytes: int = 16384) -> tuple[Trace, int]:
    """Synthetic microbenchmark: load, store or lock, private or shared.

    load:  sequential word reads over the working set
    store: sequential word writes, each followed by a readback
    lock:  LX / SX / releasing W triples on one lock word

    Private runs give each core its own buffer; shared runs use one buffer
    with per-core staggered start offsets (stores collide on every line
    eventually, which is the point).
    """
    if kind not in ("load", "store", "lock"):
        raise ValueError(f"unknown microbenchmark kind {kind!r}")
    if sharing not in ("private", "shared"):
        raise ValueError(f"unknown sharing mode {sharing!r}")

    trace = Trace(measure_from=_WARM_GAP * n_cores)
    base = 0x200000

    if kind == "lock":
        n_locks = 1 if sharing == "shared" else n_cores
        length = _region_len(n_locks * 64)
        trace.regions.append((base, length, mem_type))
        # lock handover: acquire/release triples rotate through the cores,
        # spaced so each holder sees the previous holder's dirty line
        period = 2500
        rounds = -(-iters * n_cores // 3)  # 3 ops per round, one core at a time
        for rnd in range(rounds):
            core = rnd % n_cores
            lock_addr = base if sharing == "shared" else base + core * 64
            t = trace.measure_from + rnd * period
            trace.records.append(TraceRecord(t, core, Op.LOAD_EXCL, lock_addr))
            trace.records.append(TraceRecord(t, core, Op.STORE_EXCL, lock_addr, 1))
            trace.records.append(TraceRecord(t, core, Op.STORE, lock_addr, 0))
        return trace, n_cores

    n_bufs = 1 if sharing == "shared" else n_cores
    length = _region_len(ws_bytes)
    for i in range(n_bufs):
        trace.regions.append((base + i * length, length, mem_type))

    n_words = ws_bytes // 8
    for core in range(n_cores):
        buf = base if sharing == "shared" else base + core * length
        start_word = (core * n_words // n_cores) if sharing == "shared" else 0
        # warm pass over the working set, staggered per core
        warm_t = _WARM_GAP * core
        warm_op = Op.STORE if kind == "store" else Op.LOAD
        for w in range(n_words):
            addr = buf + ((start_word + w) % n_words) * 8
            value = (core << 16 | w) if warm_op.is_store else None
            trace.records.append(TraceRecord(warm_t, core, warm_op, addr, value))
        # measured phase
        t = trace.measure_from
        for i in range(iters):
            if kind == "load":
                addr = buf + ((start_word + i) % n_words) * 8
                trace.records.append(TraceRecord(t, core, Op.LOAD, addr))
            else:
                addr = buf + ((start_word + i // 2) % n_words) * 8
                if i % 2 == 0:
                    trace.records.append(
                        TraceRecord(t, core, Op.STORE, addr, core << 16 | i))
                else:
                    trace.records.append(TraceRecord(t, core, Op.LOAD, addr))
    return trace, n_cores


def gen_producer_consumer(n_stages: int = 4, rounds: int = 3,
                          payload_lines: int = 2, readbacks: int = 2,
                          private_accesses: int = 600,
                          typing: str = "selective") -> tuple[Trace, int]:
    """Pipeline of stages handing payload buffers down a ring.

    Each round, every stage works over a private scratch buffer, then
    writes one word per payload line into its outbound handoff buffer
    (plus `readbacks` re-reads), and reads one word per line from its
    inbound buffer.

    typing: "normal" leaves everything normal-cacheable, "selective" types
    only the handoff buffers as INC-OC, "blind" types everything INC-OC.
    """
    if typing not in ("normal", "selective", "blind"):
        raise ValueError(f"unknown typing mode {typing!r}")
    if n_stages < 2:
        raise ValueError("pipeline needs at least two stages")

    handoff_type = (MemoryType.NORMAL_CACHEABLE if typing == "normal"
                    else MemoryType.INC_OC)
    private_type = (MemoryType.INC_OC if typing == "blind"
                    else MemoryType.NORMAL_CACHEABLE)

    trace = Trace(measure_from=_WARM_GAP)
    scratch_base = 0x300000
    scratch_lines = 16
    for core in range(n_stages):
        trace.regions.append(
            (scratch_base + core * _PAGE, _PAGE, private_type))
    handoff_base = 0x400000
    for stage in range(n_stages):  # buffer i: stage i -> stage (i+1) % n
        trace.regions.append((handoff_base + stage * _PAGE, _PAGE, handoff_type))

    # warm the scratch buffers so the measured phase starts from hits
    for core in range(n_stages):
        scratch = scratch_base + core * _PAGE
        for line in range(scratch_lines):
            trace.records.append(
                TraceRecord(0, core, Op.STORE, scratch + line * 64, core))

    round_period = 60000  # generous: every round settles before the next
    for rnd in range(rounds):
        t = trace.measure_from + rnd * round_period
        for core in range(n_stages):
            scratch = scratch_base + core * _PAGE
            out_buf = handoff_base + core * _PAGE
            in_buf = handoff_base + ((core - 1) % n_stages) * _PAGE
            for i in range(private_accesses):
                addr = scratch + (i % (scratch_lines * 8)) * 8
                if i % 4 == 0:
                    trace.records.append(
                        TraceRecord(t, core, Op.STORE, addr, rnd << 8 | core))
                else:
                    trace.records.append(TraceRecord(t, core, Op.LOAD, addr))
            for line in range(payload_lines):
                addr = out_buf + line * 64
                trace.records.append(
                    TraceRecord(t, core, Op.STORE, addr, rnd << 8 | line))
                for _ in range(readbacks):
                    trace.records.append(TraceRecord(t, core, Op.LOAD, addr))
            # consume the previous round's inbound payload
            for line in range(payload_lines):
                trace.records.append(
                    TraceRecord(t + round_period // 2, core, Op.LOAD,
                                in_buf + line * 64))
    return trace, n_stages

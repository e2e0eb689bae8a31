"""Per-core private set-associative L1 cache controller.

Normal-cacheable requests run the MSI machine locally; INC-OC and
uncacheable requests are forwarded toward the L2 after the L1 processing
latency, never allocating a line. One outstanding core request per core.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .memory import MemoryType
from .protocol import (
    AccessClass,
    CoherenceEvent,
    Message,
    MessageKind,
    MSIState,
    Op,
    ProtocolViolation,
    RemoteLoadPolicy,
    classify,
    l1_next,
)


@dataclass
class L1Config:
    size: int = 32768
    associativity: int = 4
    line_size: int = 64

    @property
    def n_sets(self) -> int:
        return self.size // (self.associativity * self.line_size)

    def validate(self, page_size: int = 4096) -> None:
        if self.size <= 0 or self.associativity <= 0 or self.line_size <= 0:
            raise ValueError("l1 size, associativity and line_size must be positive")
        if self.size % (self.associativity * self.line_size):
            raise ValueError("l1 size must equal sets * ways * line_size")
        n = self.n_sets
        if n & (n - 1):
            raise ValueError("l1 set count must be a power of two")
        if page_size % self.line_size:
            raise ValueError("line_size must divide page_size")


@dataclass
class CacheLine:
    tag: int
    state: MSIState
    data: dict[int, int] = field(default_factory=dict)  # word offset -> value
    lru_rank: int = 0


_REQ_KIND = {
    MemoryType.INC_OC: {
        Op.LOAD: MessageKind.INCOC_LOAD,
        Op.STORE: MessageKind.INCOC_STORE,
        Op.LOAD_EXCL: MessageKind.INCOC_LOAD_EXCL,
        Op.STORE_EXCL: MessageKind.INCOC_STORE_EXCL,
    },
    MemoryType.UNCACHEABLE: {
        Op.LOAD: MessageKind.UNC_LOAD,
        Op.STORE: MessageKind.UNC_STORE,
        # LL/SC to uncacheable memory degrades to plain load/store
        Op.LOAD_EXCL: MessageKind.UNC_LOAD,
        Op.STORE_EXCL: MessageKind.UNC_STORE,
    },
}


class L1Cache:
    def __init__(self, core_id, config: L1Config, latencies, engine, send_to_l2,
                 complete_cb, remote_load_policy=RemoteLoadPolicy.DOWNGRADE_SHARED):
        self.core_id = core_id
        self.config = config
        self.lat = latencies
        self.engine = engine
        self._send_to_l2 = send_to_l2  # (message, arrival_delay) consumer
        self._complete = complete_cb   # (request, success) -> None
        self.policy = remote_load_policy
        self.name = f"l1.{core_id}"

        self.sets: list[dict[int, CacheLine]] = [dict() for _ in range(config.n_sets)]
        self._lru_clock = 0
        self.pending = None            # outstanding core request
        self._parked = None            # request waiting on a dirty eviction
        self.monitor_line: int | None = None  # local exclusive monitor

    # --- address helpers -------------------------------------------------

    def line_addr(self, addr: int) -> int:
        return addr - addr % self.config.line_size

    def _place(self, addr: int) -> tuple[int, int]:
        line_no = addr // self.config.line_size
        return line_no % self.config.n_sets, line_no // self.config.n_sets

    def lookup(self, addr: int) -> CacheLine | None:
        set_idx, tag = self._place(addr)
        return self.sets[set_idx].get(tag)

    def _addr_of(self, set_idx: int, tag: int) -> int:
        return (tag * self.config.n_sets + set_idx) * self.config.line_size

    def resident_lines(self):
        """Yield (line_addr, state) for every allocated line."""
        for set_idx, ways in enumerate(self.sets):
            for tag, line in ways.items():
                yield self._addr_of(set_idx, tag), line.state

    def _touch(self, line: CacheLine) -> None:
        self._lru_clock += 1
        line.lru_rank = self._lru_clock

    # --- message emission -------------------------------------------------

    def _send(self, messages) -> None:
        # Sends serialize on the outgoing port: queue_issue ticks each.
        for i, msg in enumerate(messages):
            delay = (i + 1) * self.lat.queue_issue + self.lat.l1_to_l2_hop
            self._send_to_l2(msg, delay)

    def _emit_for(self, kinds, addr: int, line: CacheLine | None,
                  req_id: int | None = None) -> None:
        msgs = []
        for kind in kinds:
            data = dict(line.data) if line is not None and kind in (
                MessageKind.FWD_DATA, MessageKind.PUT_M) else {}
            rid = req_id if kind in (MessageKind.GET_S, MessageKind.GET_M) else None
            msgs.append(Message(kind, addr, self.core_id, "l2", req_id=rid, data=data))
        self._send(msgs)

    # --- core side --------------------------------------------------------

    def handle_core_request(self, req) -> None:
        assert self.pending is None, "blocking core model: one outstanding request"
        self.pending = req
        self.engine.schedule(self.lat.l1_proc, self._act_on_core_request, req)

    def _act_on_core_request(self, req) -> None:
        req.result.l1_action = self.engine.now
        if req.mem_type is not MemoryType.NORMAL_CACHEABLE:
            kind = _REQ_KIND[req.mem_type][req.op]
            addr = self.line_addr(req.addr)
            data = {}
            if req.op.is_store:
                data[req.addr - addr] = req.value
            msg = Message(kind, addr, self.core_id, "l2", req_id=req.req_id, data=data)
            self._send([msg])
            return

        addr = self.line_addr(req.addr)
        line = self.lookup(addr)
        state = line.state if line is not None else MSIState.I
        if line is not None and state not in (MSIState.S, MSIState.M):
            raise ProtocolViolation(
                f"core request while line {addr:#x} is transient ({state.value})"
            )
        access = classify(state, req.op, line is not None)

        if access is AccessClass.HIT:
            self._commit(req, line)
            return

        if access is AccessClass.COHERENCE_MISS:
            outcome = l1_next(state, CoherenceEvent.SELF_STORE, self.policy)
            self.engine.log_transition(self.name, addr, "SelfStore",
                                       state.value, outcome.next.value)
            line.state = outcome.next
            self._emit_for(outcome.emit, addr, line, req_id=req.req_id)
            return

        # plain miss: may need a victim first
        set_idx, tag = self._place(addr)
        ways = self.sets[set_idx]
        if len(ways) >= self.config.associativity:
            if self._evict_victim(set_idx, req):
                return  # dirty eviction in flight; request parked
        event = CoherenceEvent.SELF_STORE if req.op.is_store else CoherenceEvent.SELF_LOAD
        outcome = l1_next(MSIState.I, event, self.policy)
        self.engine.log_transition(self.name, addr, event.value, "I", outcome.next.value)
        assert req.mem_type is MemoryType.NORMAL_CACHEABLE
        ways[tag] = CacheLine(tag, outcome.next)
        self._emit_for(outcome.emit, addr, None, req_id=req.req_id)

    def _evict_victim(self, set_idx: int, req) -> bool:
        """Evict the LRU stable line of the set. Returns True when the
        eviction is a dirty writeback the request must wait for."""
        ways = self.sets[set_idx]
        victim_tag, victim = min(
            ((t, l) for t, l in ways.items() if l.state in (MSIState.S, MSIState.M)),
            key=lambda tl: tl[1].lru_rank,
        )
        victim_addr = self._addr_of(set_idx, victim_tag)
        outcome = l1_next(victim.state, CoherenceEvent.SELF_EVICT, self.policy)
        self.engine.log_transition(self.name, victim_addr, "SelfEvict",
                                   victim.state.value, outcome.next.value)
        if self.monitor_line == victim_addr:
            self.monitor_line = None
        if victim.state is MSIState.M:
            victim.state = outcome.next  # MI_WB: hold the way until WbAck
            self._emit_for(outcome.emit, victim_addr, victim)
            self._parked = req
            return True
        del ways[victim_tag]
        self._emit_for(outcome.emit, victim_addr, None)
        return False

    def _commit(self, req, line: CacheLine) -> None:
        """Finish a request against a line that now permits it."""
        addr = self.line_addr(req.addr)
        offset = req.addr - addr
        success = True
        if req.op is Op.STORE:
            line.data[offset] = req.value
            if self.monitor_line == addr:
                self.monitor_line = None
        elif req.op is Op.LOAD_EXCL:
            self.monitor_line = addr
        elif req.op is Op.STORE_EXCL:
            success = self.monitor_line == addr
            if success:
                line.data[offset] = req.value
            self.monitor_line = None
        self._touch(line)
        self.pending = None
        self._complete(req, success)

    # --- L2 side ------------------------------------------------------------

    def deliver(self, msg: Message) -> None:
        """Message arrival from the L2."""
        kind = msg.kind
        if kind in (MessageKind.DATA_S, MessageKind.DATA_M):
            self.engine.schedule(self.lat.l1_proc, self._fill, msg)
        elif kind in (MessageKind.INV, MessageKind.FWD_LOAD, MessageKind.WB_ACK):
            self.engine.schedule(self.lat.l1_proc, self._act_on_l2_message, msg)
        elif kind in (MessageKind.INCOC_DATA, MessageKind.INCOC_STORE_ACK,
                      MessageKind.UNC_DATA, MessageKind.UNC_ACK):
            # responses for non-inner-cacheable requests go straight to the core
            req = self.pending
            assert req is not None and req.req_id == msg.req_id
            self.pending = None
            self._complete(req, msg.success)
        else:
            raise ProtocolViolation(f"L1 cannot handle {msg!r}")

    def _fill(self, msg: Message) -> None:
        line = self.lookup(msg.addr)
        if line is None:
            raise ProtocolViolation(f"data response {msg!r} for absent line")
        outcome = l1_next(line.state, CoherenceEvent.DATA_RESPONSE, self.policy)
        self.engine.log_transition(self.name, msg.addr, "DataResponse",
                                   line.state.value, outcome.next.value)
        line.state = outcome.next
        line.data = dict(msg.data)
        req = self.pending
        assert req is not None and self.line_addr(req.addr) == msg.addr
        self._commit(req, line)

    def _act_on_l2_message(self, msg: Message) -> None:
        line = self.lookup(msg.addr)
        if line is None:
            # Stale message for a line already gone (crossed with PutS/PutM).
            if msg.kind is MessageKind.INV:
                self._send([Message(MessageKind.INV_ACK, msg.addr, self.core_id, "l2")])
            return
        if msg.kind is MessageKind.WB_ACK and line.state is not MSIState.MI_WB:
            return  # stale ack: the line was recalled before its PutM landed

        event = {
            MessageKind.INV: CoherenceEvent.OTHER_STORE,
            MessageKind.FWD_LOAD: CoherenceEvent.OTHER_LOAD,
            MessageKind.WB_ACK: CoherenceEvent.WB_ACK,
        }[msg.kind]
        outcome = l1_next(line.state, event, self.policy)
        self.engine.log_transition(self.name, msg.addr, event.value,
                                   line.state.value, outcome.next.value)
        self._emit_for(outcome.emit, msg.addr, line)
        if self.monitor_line == msg.addr and msg.kind is MessageKind.INV:
            self.monitor_line = None

        set_idx, tag = self._place(msg.addr)
        was = line.state
        line.state = outcome.next
        if outcome.next is MSIState.I:
            del self.sets[set_idx][tag]
            if was is MSIState.MI_WB and self._parked is not None:
                self._resume_parked()
        elif outcome.next is MSIState.IM_D:
            line.data = {}

    def _resume_parked(self) -> None:
        req, self._parked = self._parked, None
        # the parked request already paid its processing latency
        self._act_on_core_request(req)

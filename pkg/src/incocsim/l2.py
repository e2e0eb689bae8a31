"""Shared, strictly inclusive L2 cache that doubles as the coherence
directory.

Normal lines are served through sharer/owner tracking with recall and
invalidation fan-out; INC-OC lines are single-copy lines that never exist
in any L1, including the exclusive-access (LL/SC) monitors for them.

The controller is a single server: each handled message occupies it for
l2_proc ticks. Requests that target a line with an in-flight transaction
are parked and replayed FIFO when the transaction ends.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

from .engine import SimulationFault, TypeMismatch
from .protocol import Message, MessageKind, ProtocolViolation, RemoteLoadPolicy


class LineKind(enum.Enum):
    NORMAL = "normal"
    INCOC = "incoc"


@dataclass
class L2Config:
    size: int = 2 * 1024 * 1024
    associativity: int = 16
    line_size: int = 64
    # the L2 is always strictly inclusive of all L1s

    @property
    def n_sets(self) -> int:
        return self.size // (self.associativity * self.line_size)

    def validate(self, l1_line_size: int = 64) -> None:
        if self.size <= 0 or self.associativity <= 0 or self.line_size <= 0:
            raise ValueError("l2 size, associativity and line_size must be positive")
        if self.line_size != l1_line_size:
            raise ValueError("l1 and l2 line sizes must match")
        if self.size % (self.associativity * self.line_size):
            raise ValueError("l2 size must equal sets * ways * line_size")
        n = self.n_sets
        if n & (n - 1):
            raise ValueError("l2 set count must be a power of two")


@dataclass
class DirectoryEntry:
    tag: int
    line_kind: LineKind
    data: dict[int, int] = field(default_factory=dict)
    owner: int | None = None
    sharers: set[int] = field(default_factory=set)
    dirty: bool = False
    lru_rank: int = 0


@dataclass
class _Txn:
    addr: int
    acks_needed: int = 0
    on_acks_done: object = None
    on_fwd_data: object = None


_REQUEST_KINDS = frozenset({
    MessageKind.GET_S, MessageKind.GET_M, MessageKind.PUT_M, MessageKind.PUT_S,
    MessageKind.INCOC_LOAD, MessageKind.INCOC_STORE,
    MessageKind.INCOC_LOAD_EXCL, MessageKind.INCOC_STORE_EXCL,
    MessageKind.UNC_LOAD, MessageKind.UNC_STORE,
})


class L2Directory:
    def __init__(self, config: L2Config, latencies, engine, send_to_l1,
                 remote_load_policy=RemoteLoadPolicy.DOWNGRADE_SHARED):
        self.config = config
        self.lat = latencies
        self.engine = engine
        self._send_to_l1 = send_to_l1  # (core, message, arrival_delay)
        self.policy = remote_load_policy
        self.name = "l2"

        self.sets: list[dict[int, DirectoryEntry]] = [dict() for _ in range(config.n_sets)]
        self._lru_clock = 0
        self.dram: dict[int, dict[int, int]] = {}
        # LL/SC markup for INC-OC lines; keyed by address so a monitor
        # survives eviction and refetch of its line
        self.monitors: dict[int, set[int]] = {}

        self.busy: dict[int, _Txn] = {}
        self.parked: dict[int, deque] = {}
        self._ingress: deque[Message] = deque()
        self._busy_until = 0
        self._pump_scheduled = False

    # --- placement ---------------------------------------------------------

    def _place(self, addr: int) -> tuple[int, int]:
        line_no = addr // self.config.line_size
        return line_no % self.config.n_sets, line_no // self.config.n_sets

    def _addr_of(self, set_idx: int, tag: int) -> int:
        return (tag * self.config.n_sets + set_idx) * self.config.line_size

    def lookup(self, addr: int) -> DirectoryEntry | None:
        set_idx, tag = self._place(addr)
        return self.sets[set_idx].get(tag)

    def resident_lines(self):
        for set_idx, ways in enumerate(self.sets):
            for tag, entry in ways.items():
                yield self._addr_of(set_idx, tag), entry

    def _touch(self, entry: DirectoryEntry) -> None:
        self._lru_clock += 1
        entry.lru_rank = self._lru_clock

    # --- message plumbing ---------------------------------------------------

    def _send(self, targets) -> list[int]:
        """Send serialized messages; targets is a list of (core, message).
        Returns the departure tick of each message."""
        departures = []
        for i, (core, msg) in enumerate(targets):
            dep = self.engine.now + (i + 1) * self.lat.queue_issue
            departures.append(dep)
            self._send_to_l1(core, msg, dep - self.engine.now + self.lat.l2_to_l1_hop)
        return departures

    def deliver(self, msg: Message) -> None:
        """Message arrival from an L1."""
        self._ingress.append(msg)
        self._pump()

    def _pump(self) -> None:
        if self._pump_scheduled:
            return
        now = self.engine.now
        if now < self._busy_until:
            self._pump_scheduled = True
            self.engine.schedule(self._busy_until - now, self._pump_event)
            return
        while self._ingress:
            msg = self._ingress.popleft()
            if msg.kind in _REQUEST_KINDS and msg.addr in self.busy:
                self.parked.setdefault(msg.addr, deque()).append(msg)
                continue
            self._busy_until = now + self.lat.l2_proc
            self.engine.schedule(self.lat.l2_proc, self._handle, msg)
            if self._ingress:
                self._pump_scheduled = True
                self.engine.schedule(self.lat.l2_proc, self._pump_event)
            return

    def _pump_event(self) -> None:
        self._pump_scheduled = False
        self._pump()

    def _begin_txn(self, addr: int, **kw) -> _Txn:
        assert addr not in self.busy
        txn = _Txn(addr, **kw)
        self.busy[addr] = txn
        return txn

    def _end_txn(self, addr: int, delay: int = 0) -> None:
        """Unblock the line after `delay` ticks and replay parked requests."""
        if delay:
            self.engine.schedule(delay, self._end_txn, addr, 0)
            return
        self.busy.pop(addr, None)
        waiting = self.parked.pop(addr, None)
        if waiting:
            self._ingress.extend(waiting)
            self._pump()

    def _unblock_after_fill(self, addr: int, departure: int) -> None:
        # the transaction ends when the requester's fill commits
        done = departure + self.lat.l2_to_l1_hop + self.lat.l1_proc
        self._end_txn(addr, done - self.engine.now)

    # --- dispatch -------------------------------------------------------------

    def _handle(self, msg: Message) -> None:
        kind = msg.kind
        if kind in _REQUEST_KINDS and msg.addr in self.busy:
            # the line became busy (e.g. chosen as an eviction victim) after
            # this request left the ingress queue
            self.parked.setdefault(msg.addr, deque()).append(msg)
            return
        if kind is MessageKind.GET_S:
            self._handle_get(msg, store=False)
        elif kind is MessageKind.GET_M:
            self._handle_get(msg, store=True)
        elif kind is MessageKind.PUT_M:
            self._handle_put_m(msg)
        elif kind is MessageKind.PUT_S:
            entry = self.lookup(msg.addr)
            if entry is not None:
                entry.sharers.discard(msg.src)
        elif kind is MessageKind.INV_ACK:
            self._handle_inv_ack(msg)
        elif kind is MessageKind.FWD_DATA:
            self._handle_fwd_data(msg)
        elif kind in (MessageKind.INCOC_LOAD, MessageKind.INCOC_LOAD_EXCL):
            self._handle_incoc_load(msg)
        elif kind in (MessageKind.INCOC_STORE, MessageKind.INCOC_STORE_EXCL):
            self._handle_incoc_store(msg)
        elif kind in (MessageKind.UNC_LOAD, MessageKind.UNC_STORE):
            self.engine.schedule(self.lat.dram_access, self._finish_unc, msg)
        else:
            raise ProtocolViolation(f"L2 cannot handle {msg!r}")

    # --- normal memory ----------------------------------------------------------

    def _check_kind(self, entry: DirectoryEntry | None, want: LineKind, msg: Message):
        if entry is not None and entry.line_kind is not want:
            raise TypeMismatch(
                f"{msg!r} targets a line allocated as {entry.line_kind.value}; "
                "a line must be invalidated between memory-type changes"
            )

    def _handle_get(self, msg: Message, store: bool) -> None:
        entry = self.lookup(msg.addr)
        self._check_kind(entry, LineKind.NORMAL, msg)
        requester = msg.src

        if entry is None:
            txn = self._begin_txn(msg.addr)
            self._fill_from_dram(
                msg.addr, LineKind.NORMAL,
                lambda e: self._respond_get(e, msg, store),
            )
            return

        self._touch(entry)
        if entry.owner is not None:
            if entry.owner == requester:
                raise ProtocolViolation(
                    f"{msg!r} from current owner core {requester}"
                )
            old_owner = entry.owner
            txn = self._begin_txn(msg.addr)
            txn.on_fwd_data = lambda fwd: self._absorb_and_respond(
                entry, msg, store, old_owner
            )
            kind = MessageKind.INV if (
                store or self.policy is RemoteLoadPolicy.INVALIDATE
            ) else MessageKind.FWD_LOAD
            self.engine.log_transition(self.name, msg.addr, msg.kind.value,
                                       "owned", "recalling")
            self._send([(old_owner, Message(kind, msg.addr, "l2", old_owner))])
            return

        if store and entry.sharers - {requester}:
            targets = sorted(entry.sharers - {requester})
            txn = self._begin_txn(msg.addr)
            txn.acks_needed = len(targets)
            txn.on_acks_done = lambda: self._respond_get(entry, msg, store)
            self.engine.log_transition(self.name, msg.addr, msg.kind.value,
                                       "shared", "invalidating")
            self._send([(c, Message(MessageKind.INV, msg.addr, "l2", c))
                        for c in targets])
            return

        self._begin_txn(msg.addr)
        self._respond_get(entry, msg, store)

    def _respond_get(self, entry: DirectoryEntry, msg: Message, store: bool,
                     extra_sends=()) -> None:
        """Send the data response and record the new sharer/owner."""
        requester = msg.src
        if store:
            entry.owner = requester
            entry.sharers = set()
            response = Message(MessageKind.DATA_M, msg.addr, "l2", requester,
                               req_id=msg.req_id, data=dict(entry.data))
        else:
            entry.sharers.add(requester)
            response = Message(MessageKind.DATA_S, msg.addr, "l2", requester,
                               req_id=msg.req_id, data=dict(entry.data))
        sends = list(extra_sends) + [(requester, response)]
        departures = self._send(sends)
        self._unblock_after_fill(msg.addr, departures[-1])

    def _absorb_and_respond(self, entry: DirectoryEntry, msg: Message,
                            store: bool, old_owner: int) -> None:
        """Continue a recall transaction once the owner's dirty data arrives."""
        entry.owner = None
        entry.dirty = True
        extra = ()
        if store:
            # acknowledge the absorbed writeback before the data response;
            # the former owner's line is already invalid and drops it
            extra = ((old_owner, Message(MessageKind.WB_ACK, msg.addr, "l2", old_owner)),)
        else:
            if self.policy is RemoteLoadPolicy.DOWNGRADE_SHARED:
                entry.sharers.add(old_owner)
        self._respond_get(entry, msg, store, extra_sends=extra)

    def _handle_put_m(self, msg: Message) -> None:
        entry = self.lookup(msg.addr)
        if entry is not None and entry.owner == msg.src:
            entry.data = dict(msg.data)
            entry.dirty = True
            entry.owner = None
            self.engine.log_transition(self.name, msg.addr, "PutM", "owned", "idle")
        # stale PutM (owner already recalled): acknowledge and discard
        self._send([(msg.src, Message(MessageKind.WB_ACK, msg.addr, "l2", msg.src))])

    def _handle_inv_ack(self, msg: Message) -> None:
        txn = self.busy.get(msg.addr)
        if txn is None or txn.acks_needed <= 0:
            raise ProtocolViolation(f"unexpected {msg!r}")
        txn.acks_needed -= 1
        if txn.acks_needed == 0 and txn.on_acks_done is not None:
            done, txn.on_acks_done = txn.on_acks_done, None
            done()

    def _handle_fwd_data(self, msg: Message) -> None:
        txn = self.busy.get(msg.addr)
        if txn is None or txn.on_fwd_data is None:
            raise ProtocolViolation(f"unexpected {msg!r}")
        entry = self.lookup(msg.addr)
        entry.data = dict(msg.data)
        entry.dirty = True
        done, txn.on_fwd_data = txn.on_fwd_data, None
        done(msg)

    # --- INC-OC memory -----------------------------------------------------------

    def _handle_incoc_load(self, msg: Message) -> None:
        entry = self.lookup(msg.addr)
        self._check_kind(entry, LineKind.INCOC, msg)
        if entry is None:
            self._begin_txn(msg.addr)
            self._fill_from_dram(msg.addr, LineKind.INCOC,
                                 lambda e: self._respond_incoc_load(e, msg),
                                 unblock_on_respond=True)
            return
        self._touch(entry)
        self._respond_incoc_load(entry, msg)

    def _respond_incoc_load(self, entry: DirectoryEntry, msg: Message) -> None:
        if msg.kind is MessageKind.INCOC_LOAD_EXCL:
            self.monitors.setdefault(msg.addr, set()).add(msg.src)
        self._send([(msg.src, Message(MessageKind.INCOC_DATA, msg.addr, "l2",
                                      msg.src, req_id=msg.req_id,
                                      data=dict(entry.data)))])

    def _handle_incoc_store(self, msg: Message) -> None:
        entry = self.lookup(msg.addr)
        self._check_kind(entry, LineKind.INCOC, msg)
        exclusive = msg.kind is MessageKind.INCOC_STORE_EXCL
        if exclusive:
            monitors = self.monitors.get(msg.addr, set())
            if msg.src not in monitors:
                # failed store-exclusive: memory unchanged, own monitor cleared
                monitors.discard(msg.src)
                self._send([(msg.src, Message(MessageKind.INCOC_STORE_ACK,
                                              msg.addr, "l2", msg.src,
                                              req_id=msg.req_id, success=False))])
                return
        if entry is None:
            self._begin_txn(msg.addr)
            self._fill_from_dram(msg.addr, LineKind.INCOC,
                                 lambda e: self._commit_incoc_store(e, msg),
                                 unblock_on_respond=True)
            return
        self._touch(entry)
        self._commit_incoc_store(entry, msg)

    def _commit_incoc_store(self, entry: DirectoryEntry, msg: Message) -> None:
        entry.data.update(msg.data)
        entry.dirty = True
        self.monitors[msg.addr] = set()  # any committed store clears all monitors
        self.engine.log_transition(self.name, msg.addr, msg.kind.value,
                                   "incoc", "incoc")
        self._send([(msg.src, Message(MessageKind.INCOC_STORE_ACK, msg.addr,
                                      "l2", msg.src, req_id=msg.req_id,
                                      success=True))])

    # --- uncacheable memory ---------------------------------------------------------

    def _finish_unc(self, msg: Message) -> None:
        if msg.kind is MessageKind.UNC_STORE:
            self.dram.setdefault(msg.addr, {}).update(msg.data)
            response = Message(MessageKind.UNC_ACK, msg.addr, "l2", msg.src,
                               req_id=msg.req_id)
        else:
            response = Message(MessageKind.UNC_DATA, msg.addr, "l2", msg.src,
                               req_id=msg.req_id,
                               data=dict(self.dram.get(msg.addr, {})))
        self._send([(msg.src, response)])

    # --- fills and inclusion-preserving eviction ----------------------------------

    def _fill_from_dram(self, addr: int, kind: LineKind, then,
                        unblock_on_respond: bool = False) -> None:
        """Allocate `addr` (evicting if needed), fetch from DRAM, then
        run `then(entry)` which must send the response."""
        set_idx, tag = self._place(addr)

        def after_way_free():
            def after_fetch():
                entry = DirectoryEntry(tag, kind, data=dict(self.dram.get(addr, {})))
                self._touch(entry)
                self.sets[set_idx][tag] = entry
                then(entry)
                if unblock_on_respond:
                    self._end_txn(addr)

            self.engine.schedule(self.lat.dram_access, after_fetch)

        self._ensure_way(set_idx, after_way_free)

    def _ensure_way(self, set_idx: int, then, stalls: int = 0) -> None:
        ways = self.sets[set_idx]
        if len(ways) < self.config.associativity:
            then()
            return
        candidates = [(t, e) for t, e in ways.items()
                      if self._addr_of(set_idx, t) not in self.busy]
        if not candidates:
            # every way is mid-transaction; stall until one frees up
            if stalls >= 10000:
                raise SimulationFault(
                    f"L2 set {set_idx} stuck with every line in a busy transaction"
                )
            self.engine.schedule(self.lat.l2_proc, self._ensure_way,
                                 set_idx, then, stalls + 1)
            return
        victim_tag, victim = min(candidates, key=lambda te: te[1].lru_rank)
        self._evict(set_idx, victim_tag, victim, then)

    def _evict(self, set_idx: int, tag: int, victim: DirectoryEntry, then) -> None:
        """Back-invalidate every L1 copy, write dirty data to DRAM, drop the
        line, then continue with `then`."""
        addr = self._addr_of(set_idx, tag)
        txn = self._begin_txn(addr)
        self.engine.log_transition(self.name, addr, "Evict",
                                   victim.line_kind.value, "evicting")

        def remove_and_go():
            del self.sets[set_idx][tag]
            self._end_txn(addr)
            then()

        def writeback_then_go():
            if victim.dirty:
                self.dram[addr] = dict(victim.data)
                self.engine.schedule(self.lat.dram_access, remove_and_go)
            else:
                remove_and_go()

        if victim.owner is not None:
            owner = victim.owner

            def absorbed(_msg):
                victim.owner = None
                writeback_then_go()

            txn.on_fwd_data = absorbed
            self._send([(owner, Message(MessageKind.INV, addr, "l2", owner))])
        elif victim.sharers:
            targets = sorted(victim.sharers)
            txn.acks_needed = len(targets)

            def acked():
                victim.sharers = set()
                writeback_then_go()

            txn.on_acks_done = acked
            self._send([(c, Message(MessageKind.INV, addr, "l2", c)) for c in targets])
        else:
            writeback_then_go()

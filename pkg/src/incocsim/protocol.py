"""Table-driven MSI state machine and access classification.

Stable states are I, S and M. The four transient states cover a blocking
directory protocol: IS_D / IM_D wait for data after a load / store miss,
SM_D waits for an upgrade, MI_WB waits for a writeback acknowledgement.

Everything here is pure; the cache controllers own all timing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class ProtocolViolation(Exception):
    """An illegal (state, event) pair. Indicates a simulator bug."""


class MSIState(enum.Enum):
    I = "I"
    S = "S"
    M = "M"
    IS_D = "IS_D"
    IM_D = "IM_D"
    SM_D = "SM_D"
    MI_WB = "MI_WB"


STABLE_STATES = (MSIState.I, MSIState.S, MSIState.M)


class CoherenceEvent(enum.Enum):
    SELF_LOAD = "SelfLoad"
    SELF_STORE = "SelfStore"
    SELF_EVICT = "SelfEvict"
    OTHER_LOAD = "OtherLoad"
    OTHER_STORE = "OtherStore"
    DATA_RESPONSE = "DataResponse"
    INV_ACK = "InvAck"
    WB_ACK = "WbAck"


class MessageKind(enum.Enum):
    # L1 -> L2 coherence requests
    GET_S = "GetS"
    GET_M = "GetM"
    PUT_M = "PutM"
    PUT_S = "PutS"
    # L2 -> L1 coherence traffic
    INV = "Inv"
    FWD_LOAD = "FwdLoad"
    DATA_S = "DataS"
    DATA_M = "DataM"
    WB_ACK = "WbAck"
    # L1 -> L2 coherence responses
    INV_ACK = "InvAck"
    FWD_DATA = "FwdData"
    # INC-OC traffic: never touches L1 line state
    INCOC_LOAD = "IncOcLoad"
    INCOC_STORE = "IncOcStore"
    INCOC_LOAD_EXCL = "IncOcLoadExcl"
    INCOC_STORE_EXCL = "IncOcStoreExcl"
    INCOC_DATA = "IncOcData"
    INCOC_STORE_ACK = "IncOcStoreAck"
    # Uncacheable traffic: straight to the DRAM backstop
    UNC_LOAD = "UncLoad"
    UNC_STORE = "UncStore"
    UNC_DATA = "UncData"
    UNC_ACK = "UncAck"


INCOC_KINDS = frozenset({
    MessageKind.INCOC_LOAD, MessageKind.INCOC_STORE,
    MessageKind.INCOC_LOAD_EXCL, MessageKind.INCOC_STORE_EXCL,
    MessageKind.INCOC_DATA, MessageKind.INCOC_STORE_ACK,
})


class AccessClass(enum.Enum):
    HIT = "hit"
    MISS = "miss"
    COHERENCE_MISS = "coherence_miss"


class Op(enum.Enum):
    LOAD = "R"
    STORE = "W"
    LOAD_EXCL = "LX"
    STORE_EXCL = "SX"

    @property
    def is_store(self) -> bool:
        return self in (Op.STORE, Op.STORE_EXCL)


class RemoteLoadPolicy(enum.Enum):
    DOWNGRADE_SHARED = "downgrade_shared"
    INVALIDATE = "invalidate"


@dataclass(frozen=True)
class TransitionOutcome:
    next: MSIState
    emit: tuple[MessageKind, ...] = ()
    writeback: bool = False


def _build_table(remote_load_policy: RemoteLoadPolicy):
    S = MSIState
    E = CoherenceEvent
    K = MessageKind
    downgraded = S.S if remote_load_policy is RemoteLoadPolicy.DOWNGRADE_SHARED else S.I
    return {
        (S.I, E.SELF_LOAD): TransitionOutcome(S.IS_D, (K.GET_S,)),
        (S.I, E.SELF_STORE): TransitionOutcome(S.IM_D, (K.GET_M,)),
        (S.S, E.SELF_LOAD): TransitionOutcome(S.S),
        (S.S, E.SELF_STORE): TransitionOutcome(S.SM_D, (K.GET_M,)),
        (S.S, E.SELF_EVICT): TransitionOutcome(S.I, (K.PUT_S,)),
        (S.S, E.OTHER_STORE): TransitionOutcome(S.I, (K.INV_ACK,)),
        (S.M, E.SELF_LOAD): TransitionOutcome(S.M),
        (S.M, E.SELF_STORE): TransitionOutcome(S.M),
        (S.M, E.SELF_EVICT): TransitionOutcome(S.MI_WB, (K.PUT_M,), writeback=True),
        (S.M, E.OTHER_STORE): TransitionOutcome(S.I, (K.FWD_DATA,), writeback=True),
        (S.M, E.OTHER_LOAD): TransitionOutcome(downgraded, (K.FWD_DATA,), writeback=True),
        (S.IS_D, E.DATA_RESPONSE): TransitionOutcome(S.S),
        (S.IM_D, E.DATA_RESPONSE): TransitionOutcome(S.M),
        (S.SM_D, E.DATA_RESPONSE): TransitionOutcome(S.M),
        # An upgrade in flight loses the line to an earlier writer and
        # degrades to a plain store miss; the directory replays it in full.
        (S.SM_D, E.OTHER_STORE): TransitionOutcome(S.IM_D, (K.INV_ACK,)),
        # An invalidation crossed with this core's own eviction + re-request;
        # the directory still counts it as a sharer and needs the ack.
        (S.IS_D, E.OTHER_STORE): TransitionOutcome(S.IS_D, (K.INV_ACK,)),
        (S.IM_D, E.OTHER_STORE): TransitionOutcome(S.IM_D, (K.INV_ACK,)),
        (S.MI_WB, E.WB_ACK): TransitionOutcome(S.I),
        # Writeback raced with a recall: hand the data over, the directory
        # discards the stale PutM.
        (S.MI_WB, E.OTHER_STORE): TransitionOutcome(S.I, (K.FWD_DATA,), writeback=True),
        (S.MI_WB, E.OTHER_LOAD): TransitionOutcome(S.I, (K.FWD_DATA,), writeback=True),
    }


_TABLES = {policy: _build_table(policy) for policy in RemoteLoadPolicy}


def legal_pairs(remote_load_policy=RemoteLoadPolicy.DOWNGRADE_SHARED):
    return frozenset(_TABLES[remote_load_policy])


def l1_next(current: MSIState, event: CoherenceEvent,
            remote_load_policy=RemoteLoadPolicy.DOWNGRADE_SHARED) -> TransitionOutcome:
    try:
        return _TABLES[remote_load_policy][(current, event)]
    except KeyError:
        raise ProtocolViolation(
            f"illegal L1 transition: event {event.value} in state {current.value}"
        ) from None


def classify(state: MSIState, op: Op, present: bool) -> AccessClass:
    if not present or state is MSIState.I:
        return AccessClass.MISS
    if state is MSIState.M:
        return AccessClass.HIT
    if state is MSIState.S:
        return AccessClass.HIT if not op.is_store else AccessClass.COHERENCE_MISS
    # transient states never classify; the controller blocks instead
    raise ProtocolViolation(f"classify called on transient state {state.value}")


@dataclass
class Message:
    kind: MessageKind
    addr: int                       # line-aligned byte address
    src: object                     # core id (int) or "l2"
    dst: object
    req_id: int | None = None
    data: dict[int, int] = field(default_factory=dict)  # word offset -> value
    success: bool = True            # payload flag for IncOcStoreAck

    def __repr__(self):  # compact, for event logs and diagnostics
        return f"<{self.kind.value} {self.addr:#x} {self.src}->{self.dst}>"

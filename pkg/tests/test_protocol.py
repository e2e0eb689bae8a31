"""Exhaustive coverage of the MSI transition table: every legal
(state, event) pair is exercised and every illegal pair raises."""

import itertools

import pytest

from incocsim.protocol import (
    AccessClass,
    CoherenceEvent,
    MessageKind,
    MSIState,
    Op,
    ProtocolViolation,
    RemoteLoadPolicy,
    classify,
    l1_next,
    legal_pairs,
)

ALL_PAIRS = list(itertools.product(MSIState, CoherenceEvent))


@pytest.mark.parametrize("policy", list(RemoteLoadPolicy))
def test_every_pair_is_either_legal_or_raises(policy):
    legal = legal_pairs(policy)
    for state, event in ALL_PAIRS:
        if (state, event) in legal:
            outcome = l1_next(state, event, policy)
            assert isinstance(outcome.next, MSIState)
        else:
            with pytest.raises(ProtocolViolation):
                l1_next(state, event, policy)


@pytest.mark.parametrize("policy", list(RemoteLoadPolicy))
def test_all_legal_pairs_reachable_states(policy):
    # every transition target must itself be a known state with outgoing
    # edges or a stable state
    legal = legal_pairs(policy)
    states_with_exits = {s for s, _ in legal} | {MSIState.I}
    for pair in legal:
        assert l1_next(*pair, policy).next in states_with_exits


def test_expected_table_shape():
    legal = legal_pairs()
    assert len(legal) == 20
    # spot anchors straight from the protocol definition
    assert l1_next(MSIState.I, CoherenceEvent.SELF_LOAD).next is MSIState.IS_D
    assert l1_next(MSIState.I, CoherenceEvent.SELF_STORE).emit == (MessageKind.GET_M,)
    assert l1_next(MSIState.S, CoherenceEvent.SELF_STORE).next is MSIState.SM_D
    assert l1_next(MSIState.M, CoherenceEvent.SELF_EVICT).next is MSIState.MI_WB
    assert l1_next(MSIState.MI_WB, CoherenceEvent.WB_ACK).next is MSIState.I


def test_remote_load_policy_changes_only_the_downgrade():
    down = l1_next(MSIState.M, CoherenceEvent.OTHER_LOAD,
                   RemoteLoadPolicy.DOWNGRADE_SHARED)
    inval = l1_next(MSIState.M, CoherenceEvent.OTHER_LOAD,
                    RemoteLoadPolicy.INVALIDATE)
    assert down.next is MSIState.S
    assert inval.next is MSIState.I
    assert down.emit == inval.emit == (MessageKind.FWD_DATA,)
    for state, event in legal_pairs():
        if (state, event) == (MSIState.M, CoherenceEvent.OTHER_LOAD):
            continue
        assert l1_next(state, event, RemoteLoadPolicy.DOWNGRADE_SHARED) \
            == l1_next(state, event, RemoteLoadPolicy.INVALIDATE)


def test_sm_d_demotes_to_im_d_on_foreign_store():
    out = l1_next(MSIState.SM_D, CoherenceEvent.OTHER_STORE)
    assert out.next is MSIState.IM_D
    assert out.emit == (MessageKind.INV_ACK,)


def test_dirty_states_hand_over_data():
    for state in (MSIState.M, MSIState.MI_WB):
        out = l1_next(state, CoherenceEvent.OTHER_STORE)
        assert out.emit == (MessageKind.FWD_DATA,)
        assert out.writeback


def test_classify_hits_misses():
    assert classify(MSIState.I, Op.LOAD, True) is AccessClass.MISS
    assert classify(MSIState.I, Op.STORE, False) is AccessClass.MISS
    assert classify(MSIState.S, Op.LOAD, True) is AccessClass.HIT
    assert classify(MSIState.S, Op.STORE, True) is AccessClass.COHERENCE_MISS
    assert classify(MSIState.S, Op.STORE_EXCL, True) is AccessClass.COHERENCE_MISS
    assert classify(MSIState.M, Op.STORE, True) is AccessClass.HIT
    assert classify(MSIState.M, Op.LOAD_EXCL, True) is AccessClass.HIT


@pytest.mark.parametrize("state", [MSIState.IS_D, MSIState.IM_D,
                                   MSIState.SM_D, MSIState.MI_WB])
def test_classify_rejects_transient_states(state):
    with pytest.raises(ProtocolViolation):
        classify(state, Op.LOAD, True)


def test_op_store_flags():
    assert Op.STORE.is_store and Op.STORE_EXCL.is_store
    assert not Op.LOAD.is_store and not Op.LOAD_EXCL.is_store

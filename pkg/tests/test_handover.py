import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfleo.handover import (CURRENT_CLUSTER, NEXT_CLUSTER, HandoverEvent, HandoverState, reassociate,
                            service_intervals, service_time_stats, update)


def _drive(admitted_seq, visible=True, confirm=2):
    state = HandoverState.initial(1)
    events, assoc = [], []
    for t, a in enumerate(admitted_seq):
        if state.in_cluster()[0]:
            state, ev = update(state, np.array([a]), np.array([visible]), t, confirm)
            events += ev
        assoc.append(state.serving[0])
    return state, events, assoc


def kinds(events):
    return [e.kind for e in events]


def test_always_served_no_events():
    state, events, assoc = _drive([True] * 50)
    assert events == []
    assert service_time_stats(np.array(assoc)[:, None], 0)[0] == 50


def test_two_infeasible_slots_trigger_handover():
    state, events, _ = _drive([True, False, False, True])
    assert kinds(events) == ["request", "request", "confirmed", "executed"]
    ex = [e for e in events if e.kind == "executed"]
    assert len(ex) == 1 and ex[0].slot == 2
    assert (ex[0].src, ex[0].dst) == (CURRENT_CLUSTER, NEXT_CLUSTER)
    assert state.serving == (NEXT_CLUSTER,)
    assert state.connected_since[0] == 2


def test_single_infeasible_slot_only_requests():
    state, events, _ = _drive([False, True, True])
    assert kinds(events) == ["request"]
    assert state.consecutive_infeasible[0] == 0
    assert state.serving == (CURRENT_CLUSTER,)


def test_invisible_next_cluster_is_false_alarm():
    state, events, _ = _drive([False, False, False], visible=False)
    assert kinds(events) == ["request", "request", "false_alarm_avoided", "request", "false_alarm_avoided"]
    assert state.serving == (CURRENT_CLUSTER,)


def test_threshold_one_always_visible():
    _, events, _ = _drive([True, False], confirm=1)
    assert kinds(events).count("executed") == 1
    assert [e.slot for e in events if e.kind == "executed"] == [1]


def test_subset_update_leaves_others():
    state = HandoverState.initial(3)
    state, ev = update(state, np.array([False]), np.ones(3, bool), 0, 1, uts=np.array([2]))
    assert state.serving == (CURRENT_CLUSTER, CURRENT_CLUSTER, NEXT_CLUSTER)
    assert [e.ut for e in ev] == [2, 2, 2]


def test_bad_event_kind():
    with pytest.raises(ValueError):
        HandoverEvent(0, 0, "teleport", "C0", "C1")


def test_confirm_slots_validated():
    with pytest.raises(ValueError):
        update(HandoverState.initial(1), np.array([True]), np.array([True]), 0, 0)


def test_reassociate_counts_changes():
    state = HandoverState.initial(2, "-")
    state, ev = reassociate(state, np.array([0, 1]), 0)
    assert ev == []
    state, ev = reassociate(state, np.array([0, 2]), 1)
    assert kinds(ev) == ["confirmed", "executed"]
    assert (ev[1].src, ev[1].dst) == ("S1", "S2")
    state, ev = reassociate(state, np.array([-1, 2]), 2)
    assert (ev[1].src, ev[1].dst) == ("S0", "-")


def test_mid_horizon_handover_intervals():
    seq = np.array(["C0"] * 30 + ["C1"] * 30)
    np.testing.assert_array_equal(service_intervals(seq), [30, 30])
    avg, rate = service_time_stats(seq[:, None], 1, slot_duration=2.0)
    assert avg == 60.0
    assert rate == pytest.approx(1 / 120)


def test_no_handover_full_horizon():
    assoc = np.full((3, 40, 5), "C0")
    assert service_time_stats(assoc, 0, 0.5) == (20.0, 0.0)


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        service_intervals(np.array([]))


@given(st.lists(st.sampled_from(["S0", "S1", "S2", "-"]), min_size=1, max_size=60))
def test_intervals_partition_horizon(seq):
    seq = np.array(seq)
    lengths = service_intervals(seq)
    assert lengths.sum() == len(seq)
    assert np.all(lengths >= 1)
    changes = int((seq[1:] != seq[:-1]).sum())
    assert len(lengths) == changes + 1


@given(st.lists(st.booleans(), min_size=1, max_size=40), st.integers(1, 4))
def test_executed_only_after_consecutive_requests(adm, confirm):
    _, events, _ = _drive(adm, confirm=confirm)
    ex = [e.slot for e in events if e.kind == "executed"]
    assert len(ex) <= 1
    if ex:
        t = ex[0]
        assert t + 1 >= confirm
        assert not any(adm[t - confirm + 1:t + 1])

"""Per-UT association state, cluster handover decisions and service-time accounting.

Entity ids are strings: ``C0`` is the simulated serving cluster, ``C1`` the
next (trailing) cluster, ``S<m>`` a single SAP in the baseline modes and
``-`` no association.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

CURRENT_CLUSTER = "C0"
NEXT_CLUSTER = "C1"
NO_ENTITY = "-"

KINDS = ("request", "confirmed", "executed", "false_alarm_avoided")


def sap_id(m: int) -> str:
    return NO_ENTITY if m < 0 else f"S{m}"


@dataclass(frozen=True)
class HandoverEvent:
    slot: int
    ut: int
    kind: str
    src: str
    dst: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class HandoverState:
    serving: tuple[str, ...]
    consecutive_infeasible: np.ndarray  # (K,) int
    connected_since: np.ndarray  # (K,) slot index
    pending_request: np.ndarray  # (K,) bool

    @classmethod
    def initial(cls, num_uts: int, serving: str | Iterable[str] = CURRENT_CLUSTER) -> "HandoverState":
        if isinstance(serving, str):
            serving = (serving,) * num_uts
        return cls(serving=tuple(serving),
                   consecutive_infeasible=np.zeros(num_uts, dtype=int),
                   connected_since=np.zeros(num_uts, dtype=int),
                   pending_request=np.zeros(num_uts, dtype=bool))

    @property
    def num_uts(self) -> int:
        return len(self.serving)

    def in_cluster(self) -> np.ndarray:
        """UTs still handled by the simulated cluster."""
        return np.array([s == CURRENT_CLUSTER for s in self.serving], dtype=bool)


def update(state: HandoverState, admitted: np.ndarray, next_visible: np.ndarray, t: int,
           confirm_slots: int = 2, uts: np.ndarray | None = None):
    """Advance the cluster-mode state machine by one slot.

    ``admitted`` holds the admission indicators of the UTs listed in ``uts``
    (default: all); UTs outside ``uts`` are left untouched. A non-admitted UT
    issues a request; once requests have repeated for ``confirm_slots``
    consecutive slots, the handover executes if the next cluster sees the
    UT, otherwise the decision is dropped as a false alarm.
    """
    if confirm_slots < 1:
        raise ValueError("confirm_slots must be >= 1")
    K = state.num_uts
    uts = np.arange(K) if uts is None else np.asarray(uts)
    admitted = np.asarray(admitted, dtype=bool)
    serving = list(state.serving)
    count = state.consecutive_infeasible.copy()
    since = state.connected_since.copy()
    pending = state.pending_request.copy()
    events: list[HandoverEvent] = []
    for i, k in enumerate(uts):
        k = int(k)
        if admitted[i]:
            count[k] = 0
            pending[k] = False
            continue
        count[k] += 1
        pending[k] = True
        events.append(HandoverEvent(t, k, "request", serving[k], NEXT_CLUSTER))
        if count[k] < confirm_slots:
            continue
        if next_visible[k]:
            events.append(HandoverEvent(t, k, "confirmed", serving[k], NEXT_CLUSTER))
            events.append(HandoverEvent(t, k, "executed", serving[k], NEXT_CLUSTER))
            serving[k] = NEXT_CLUSTER
            count[k] = 0
            pending[k] = False
            since[k] = t
        else:
            events.append(HandoverEvent(t, k, "false_alarm_avoided", serving[k], NEXT_CLUSTER))
    new = replace(state, serving=tuple(serving), consecutive_infeasible=count,
                  connected_since=since, pending_request=pending)
    return new, events


def update_from_solution(state, solution, snapshot, t, confirm_slots=2, uts=None):
    return update(state, solution.admitted, snapshot.next_cluster_visible, t, confirm_slots, uts)


def reassociate(state: HandoverState, association: np.ndarray, t: int):
    """Baseline modes: any change of serving SAP is an immediate handover."""
    serving = list(state.serving)
    since = state.connected_since.copy()
    events: list[HandoverEvent] = []
    for k, m in enumerate(np.asarray(association)):
        new = sap_id(int(m))
        if new != serving[k]:
            if t > 0 or serving[k] != NO_ENTITY:
                events.append(HandoverEvent(t, k, "confirmed", serving[k], new))
                events.append(HandoverEvent(t, k, "executed", serving[k], new))
                since[k] = t
            serving[k] = new
    return replace(state, serving=tuple(serving), connected_since=since), events


def service_intervals(assoc: np.ndarray) -> np.ndarray:
    """Lengths (slots) of maximal constant-association runs of one UT's slot sequence."""
    assoc = np.asarray(assoc)
    if assoc.size == 0:
        raise ValueError("empty association sequence")
    change = np.flatnonzero(assoc[1:] != assoc[:-1]) + 1
    edges = np.concatenate([[0], change, [assoc.size]])
    return np.diff(edges)


def service_time_stats(assoc: np.ndarray, n_executed: int, slot_duration: float = 1.0):
    """Average service time (s) and handover rate (events / UT / s).

    ``assoc`` is an (runs, slots, UTs) array of entity ids; every maximal run
    of a constant id is one connection interval, and all intervals of all UTs
    and runs are pooled.
    """
    assoc = np.asarray(assoc)
    if assoc.ndim == 2:
        assoc = assoc[None]
    if assoc.size == 0:
        raise ValueError("empty association log")
    R, H, K = assoc.shape
    lengths = np.concatenate([service_intervals(assoc[r, :, k]) for r in range(R) for k in range(K)])
    avg = lengths.mean() * slot_duration
    rate = n_executed / (R * K * H * slot_duration)
    return float(avg), float(rate)

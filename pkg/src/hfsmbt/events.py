"""Run events: the single stream the operator console mirrors.

Every observable thing the executive does (states entered, outcomes gated,
autonomy changes, tree feedback) is published here as a MirrorEvent with a
gapless sequence number starting at 1. Consumers either subscribe live
(bounded queue, drop-oldest) or take a snapshot of history and then stream,
which is how a late-joining websocket client catches up without missing or
duplicating events.

`replay` folds a list of events back into a MirrorState. It is pure: the
same events always produce the same state, and a sequence gap is an error
rather than a guess.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass, field

EVENT_KINDS = (
    "behavior_started",
    "state_entered",
    "state_exited",
    "outcome_emitted",
    "transition_blocked",
    "autonomy_changed",
    "bt_feedback",
    "behavior_finished",
    "command_ack",
)

DEFAULT_HISTORY_LIMIT = 4096
DEFAULT_QUEUE_LIMIT = 512


class UnknownEventKind(ValueError):
    pass


class SeqGap(Exception):
    """Replay input skipped or repeated a sequence number."""

    def __init__(self, expected: int, got: int):
        super().__init__(f"expected seq {expected}, got {got}")
        self.expected = expected
        self.got = got


@dataclass(frozen=True)
class MirrorEvent:
    seq: int
    t_ms: float
    kind: str
    data: dict

    def to_wire(self) -> dict:
        return {"seq": self.seq, "t_ms": self.t_ms, "kind": self.kind,
                "data": self.data}

    @classmethod
    def from_wire(cls, payload: dict) -> "MirrorEvent":
        return cls(seq=int(payload["seq"]), t_ms=float(payload["t_ms"]),
                   kind=str(payload["kind"]), data=dict(payload["data"]))


class Subscription:
    """One consumer's bounded view of the stream."""

    def __init__(self, bus: "EventBus", limit: int):
        self._bus = bus
        self._queue = queue.Queue(maxsize=limit)
        self.dropped = 0
        self.closed = False

    def _offer(self, event: MirrorEvent) -> None:
        while True:
            try:
                self._queue.put_nowait(event)
                return
            except queue.Full:
                try:
                    self._queue.get_nowait()
                    self.dropped += 1
                except queue.Empty:
                    pass

    def get(self, timeout: float | None = None) -> MirrorEvent | None:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None

    def drain(self) -> list:
        events = []
        while True:
            try:
                events.append(self._queue.get_nowait())
            except queue.Empty:
                return events

    def close(self) -> None:
        self.closed = True
        self._bus._drop(self)


class EventBus:
    """Thread-safe publisher with capped history for snapshots."""

    def __init__(self, *, history_limit: int = DEFAULT_HISTORY_LIMIT,
                 clock=None):
        self._lock = threading.Lock()
        self._seq = 0
        self._history: list = []
        self._history_limit = history_limit
        self._subscribers: list = []
        start = time.monotonic()
        self.clock = clock or (lambda: (time.monotonic() - start) * 1000.0)

    def publish(self, kind: str, data: dict | None = None) -> MirrorEvent:
        if kind not in EVENT_KINDS:
            raise UnknownEventKind(kind)
        with self._lock:
            self._seq += 1
            event = MirrorEvent(seq=self._seq, t_ms=float(self.clock()),
                                kind=kind, data=dict(data or {}))
            self._history.append(event)
            if len(self._history) > self._history_limit:
                del self._history[: len(self._history) - self._history_limit]
            subscribers = list(self._subscribers)
        for sub in subscribers:
            sub._offer(event)
        return event

    def subscribe(self, *, limit: int = DEFAULT_QUEUE_LIMIT) -> Subscription:
        sub = Subscription(self, limit)
        with self._lock:
            self._subscribers.append(sub)
        return sub

    def snapshot_then_subscribe(self, *, limit: int = DEFAULT_QUEUE_LIMIT) -> tuple:
        """History copy plus a subscription registered under the same lock,
        so the pair covers the stream with no gap and no overlap."""
        sub = Subscription(self, limit)
        with self._lock:
            snapshot = list(self._history)
            self._subscribers.append(sub)
        return snapshot, sub

    def snapshot(self) -> list:
        with self._lock:
            return list(self._history)

    @property
    def last_seq(self) -> int:
        with self._lock:
            return self._seq

    def _drop(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

@dataclass
class MirrorState:
    """What a console knows after folding a prefix of the stream."""

    last_seq: int = 0
    started: bool = False
    finished_outcome: str | None = None
    autonomy: int | None = None
    active_states: list = field(default_factory=list)
    pending_block: dict | None = None
    robot_pose: dict | None = None
    active_nodes: list = field(default_factory=list)
    elapsed_ms: float | None = None
    outcomes: list = field(default_factory=list)
    blocked_count: int = 0
    forced_count: int = 0
    acks: list = field(default_factory=list)


def replay(events, into: MirrorState | None = None) -> MirrorState:
    """Fold events (seq-ordered, gapless) into a MirrorState.

    Pass `into` to extend a previously replayed state with newer events;
    the continuation must start at into.last_seq + 1.
    """
    state = into if into is not None else MirrorState()
    for event in events:
        expected = state.last_seq + 1
        if event.seq != expected:
            raise SeqGap(expected, event.seq)
        state.last_seq = event.seq
        kind, data = event.kind, event.data
        if kind == "behavior_started":
            state.started = True
        elif kind == "state_entered":
            state.active_states.append(data["state"])
        elif kind == "state_exited":
            if data["state"] in state.active_states:
                state.active_states.remove(data["state"])
        elif kind == "outcome_emitted":
            state.outcomes.append(dict(data))
            if data.get("forced"):
                state.forced_count += 1
            if state.pending_block and state.pending_block.get("state") == data.get("state"):
                state.pending_block = None
        elif kind == "transition_blocked":
            state.pending_block = dict(data)
            state.blocked_count += 1
        elif kind == "autonomy_changed":
            state.autonomy = int(data["level"])
            if state.pending_block and state.autonomy >= int(
                    state.pending_block.get("required_level", 0)):
                state.pending_block = None
        elif kind == "bt_feedback":
            state.robot_pose = data.get("robot_pose")
            state.active_nodes = list(data.get("active_nodes", ()))
            state.elapsed_ms = data.get("elapsed_ms")
        elif kind == "behavior_finished":
            state.finished_outcome = data.get("outcome")
            state.pending_block = None
        elif kind == "command_ack":
            state.acks.append(dict(data))
    return state

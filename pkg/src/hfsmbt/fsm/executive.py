"""The cycle driver that runs a state machine against a clock.

One cycle = drain operator commands, then step the machine once. With
realtime=False the clock is logical (cycle_index * period_ms) and nothing
sleeps, so scripted runs are exactly reproducible; with realtime=True each
cycle is padded to the period with wall-clock sleep.

Scripted commands fire when the clock reaches their timestamp, which in
logical mode pins them to a specific cycle.
"""

from __future__ import annotations

import queue
import threading
import time
from collections import deque

from ..events import EventBus
from .autonomy import AutonomyLevel
from .commands import (
    ConfirmTransition,
    EndGoals,
    ForceTransition,
    InjectGoal,
    Preempt,
    SetAutonomy,
)
from .machine import RESERVED_OUTCOME, RunControl, StateMachine
from .userdata import UserData

DEFAULT_PERIOD_MS = 100


class ExecutiveStall(Exception):
    def __init__(self, cycles: int):
        super().__init__(f"no outcome after {cycles} cycles")
        self.cycles = cycles


class GoalFeed:
    """Queue of navigation goals fed by operator commands or a script."""

    def __init__(self, goals=()):
        self._lock = threading.Lock()
        self._goals = deque(goals)
        self._closed = False

    def push(self, pose) -> None:
        with self._lock:
            self._goals.append(pose)

    def close(self) -> None:
        with self._lock:
            self._closed = True

    def pop(self):
        with self._lock:
            return self._goals.popleft() if self._goals else None

    @property
    def exhausted(self) -> bool:
        with self._lock:
            return self._closed and not self._goals

    @property
    def pending(self) -> int:
        with self._lock:
            return len(self._goals)


class GoalQueueState:
    """Wait for the next goal; outcome got_goal writes it to "goal".
    Emits exhausted once the feed is closed and empty."""

    outcomes = ("got_goal", "exhausted")
    input_keys = ()
    output_keys = ("goal",)

    def __init__(self, feed: GoalFeed):
        self.feed = feed

    def on_enter(self, ud):
        pass

    def execute_step(self, ud):
        pose = self.feed.pop()
        if pose is not None:
            ud.set("goal", pose)
            return "got_goal"
        if self.feed.exhausted:
            return "exhausted"
        return None

    def on_exit(self, ud):
        pass

    def on_preempt(self, ud):
        pass


class Executive:
    def __init__(self, machine: StateMachine, *,
                 period_ms: int = DEFAULT_PERIOD_MS, realtime: bool = False,
                 autonomy=AutonomyLevel.FULL, bus: EventBus | None = None,
                 userdata: UserData | None = None,
                 goal_feed: GoalFeed | None = None):
        self.machine = machine
        self.period_ms = period_ms
        self.realtime = realtime
        self.bus = bus or EventBus()
        self.control = RunControl(bus=self.bus, autonomy=autonomy)
        self.ud = userdata or UserData()
        self.goal_feed = goal_feed
        self.cycle_index = 0
        self.outcome: str | None = None
        self._inbox: queue.Queue = queue.Queue()
        self._script: list = []
        self._script_pos = 0
        self._wall_start: float | None = None
        if not realtime:
            self.bus.clock = self.now_ms
        machine.bind(self.control, machine.name)
        machine.validate()

    # -- clocks and inputs -------------------------------------------------

    def now_ms(self) -> float:
        if self.realtime:
            if self._wall_start is None:
                return 0.0
            return (time.monotonic() - self._wall_start) * 1000.0
        return float(self.cycle_index * self.period_ms)

    def submit(self, command) -> None:
        """Thread-safe: commands land at the start of the next cycle."""
        self._inbox.put(command)

    def add_script(self, entries) -> None:
        """entries: iterable of (at_ms, command), merged and kept sorted."""
        self._script.extend(entries)
        self._script.sort(key=lambda e: e[0])
        self._script_pos = 0

    # -- command application ---------------------------------------------

    def _ack(self, command: str, applied: bool, detail: str = "") -> None:
        data = {"command": command, "applied": applied}
        if detail:
            data["detail"] = detail
        self.control.publish("command_ack", **data)

    def _apply(self, cmd) -> None:
        if isinstance(cmd, SetAutonomy):
            self.control.autonomy = cmd.level
            self.control.publish("autonomy_changed", level=int(cmd.level))
            self._ack(cmd.kind, True)
            return
        if isinstance(cmd, Preempt):
            self.control.preempt_requested = True
            self._ack(cmd.kind, True)
            return
        if isinstance(cmd, ConfirmTransition):
            pending = self.machine.find_pending()
            if pending is None:
                self._ack(cmd.kind, False, "nothing blocked")
                return
            path, _, _ = pending
            if cmd.state is not None and not (
                    path == cmd.state or path.endswith(f"/{cmd.state}")):
                self._ack(cmd.kind, False,
                          f"blocked state is {path}, not {cmd.state}")
                return
            self.control.add_confirm(path)
            self._ack(cmd.kind, True)
            return
        if isinstance(cmd, ForceTransition):
            chain = self.machine.active_path()
            if not chain:
                self._ack(cmd.kind, False, "no active state")
                return
            if cmd.state is None:
                path = chain[-1]
            else:
                matches = [p for p in chain
                           if p == cmd.state or p.endswith(f"/{cmd.state}")]
                if not matches:
                    self._ack(cmd.kind, False, f"state {cmd.state} not active")
                    return
                path = matches[-1]
            spec = self.machine.find_spec(path)
            if spec is None or cmd.outcome not in spec.transitions:
                self._ack(cmd.kind, False,
                          f"outcome {cmd.outcome} not declared for {path}")
                return
            self.control.add_force(path, cmd.outcome)
            self._ack(cmd.kind, True)
            return
        if isinstance(cmd, InjectGoal):
            if self.goal_feed is None:
                self._ack(cmd.kind, False, "no goal feed")
                return
            self.goal_feed.push(cmd.pose)
            self._ack(cmd.kind, True)
            return
        if isinstance(cmd, EndGoals):
            if self.goal_feed is None:
                self._ack(cmd.kind, False, "no goal feed")
                return
            self.goal_feed.close()
            self._ack(cmd.kind, True)
            return
        self._ack(getattr(cmd, "kind", "unknown"), False, "unknown command")

    def _drain(self) -> None:
        now = self.now_ms()
        while self._script_pos < len(self._script):
            at_ms, cmd = self._script[self._script_pos]
            if at_ms > now:
                break
            self._script_pos += 1
            self._apply(cmd)
        while True:
            try:
                cmd = self._inbox.get_nowait()
            except queue.Empty:
                break
            self._apply(cmd)

    # -- main loop ---------------------------------------------------------

    def run(self, max_cycles: int | None = None) -> str:
        self._wall_start = time.monotonic()
        self.control.publish("behavior_started", name=self.machine.name,
                             period_ms=self.period_ms)
        self.control.publish("autonomy_changed",
                             level=int(self.control.autonomy))
        self.machine.on_enter(self.ud)
        outcome = None
        while True:
            cycle_start = time.monotonic()
            self._drain()
            if self.control.preempt_requested:
                self.machine.on_preempt(self.ud)
                outcome = RESERVED_OUTCOME
                break
            outcome = self.machine.execute_step(self.ud)
            self.cycle_index += 1
            if outcome is not None:
                break
            if max_cycles is not None and self.cycle_index >= max_cycles:
                self.control.publish("behavior_finished", outcome="stalled")
                raise ExecutiveStall(self.cycle_index)
            if self.realtime:
                remaining = self.period_ms / 1000.0 - (time.monotonic() - cycle_start)
                if remaining > 0:
                    time.sleep(remaining)
        self.outcome = outcome
        self.control.publish("behavior_finished", outcome=outcome)
        return outcome

"""States that delegate work to the tree execution server.

All of them poll inside execute_step and never spawn threads, so state
transitions only ever happen on the executive's cycle. Feedback received
while executing is republished on the event bus as bt_feedback, which is how
tree-level telemetry reaches the operator console without the console
talking to the tree server directly.

Preemption sends at most one cancel and then waits for the server's result,
bounded by the feedback timeout, so a canceled execution is fully torn down
before the machine moves on.
"""

from __future__ import annotations

import time

from .events import EventBus
from .fsm.machine import State
from .fsm.userdata import UserDataKeyMissing
from .server import protocol
from .server.client import BtClient, TransportError

DEFAULT_FEEDBACK_TIMEOUT_MS = 2000


class BtSession:
    """One shared connection to a tree server, reused by every bridge state
    in a machine."""

    def __init__(self, host: str = "127.0.0.1",
                 port: int = protocol.DEFAULT_BT_PORT, *,
                 feedback_timeout_ms: float = DEFAULT_FEEDBACK_TIMEOUT_MS):
        self.client = BtClient(host, port)
        self.feedback_timeout_ms = feedback_timeout_ms

    def ensure_connected(self) -> None:
        self.client.connect()

    def close(self) -> None:
        self.client.close()


class BtLoaderState(State):
    """Send tree XML to the server; done when it loads clean, failed with
    the server's error list under userdata "load_errors" otherwise."""

    outcomes = ("done", "failed")
    output_keys = ("load_errors",)

    def __init__(self, session: BtSession, xml: str | None = None,
                 path: str | None = None):
        if (xml is None) == (path is None):
            raise ValueError("pass exactly one of xml or path")
        self.session = session
        self.xml = xml
        self.path = path
        self._goal_id: str | None = None
        self._sent_at: float | None = None

    def on_enter(self, ud) -> None:
        self._goal_id = None
        self._sent_at = None

    def _read_xml(self) -> str:
        if self.xml is not None:
            return self.xml
        with open(self.path, encoding="utf-8") as fh:
            return fh.read()

    def execute_step(self, ud):
        if self._goal_id is None:
            try:
                self.session.ensure_connected()
                self._goal_id = self.session.client.send_load(self._read_xml())
            except (TransportError, OSError) as err:
                ud.set("load_errors", [str(err)])
                return "failed"
            self._sent_at = time.monotonic()
            return None
        try:
            messages = self.session.client.poll()
        except TransportError as err:
            ud.set("load_errors", [str(err)])
            return "failed"
        for message in messages:
            if message.get("id") != self._goal_id:
                continue
            if message["type"] == protocol.MSG_LOAD_RESULT:
                if message.get("ok"):
                    return "done"
                ud.set("load_errors", list(message.get("errors", ())))
                return "failed"
            if message["type"] == protocol.MSG_REJECT:
                ud.set("load_errors", [message.get("reason", "rejected")])
                return "failed"
        waited_ms = (time.monotonic() - self._sent_at) * 1000.0
        if waited_ms > self.session.feedback_timeout_ms:
            ud.set("load_errors", ["load timed out"])
            return "failed"
        return None


_RESULT_OUTCOME = {protocol.RESULT_SUCCESS: "done",
                   protocol.RESULT_FAILURE: "failed",
                   protocol.RESULT_CANCELED: "canceled"}


class BtExecuteState(State):
    """Run the loaded tree to completion.

    Outcome mirrors the server result: done / failed / canceled. Feedback is
    republished as bt_feedback events when a bus is attached. A server
    rejection or a silent server (no message within the feedback timeout)
    is failed.
    """

    outcomes = ("done", "failed", "canceled")
    send_goal = False

    def __init__(self, session: BtSession, *, tree_id: str = "",
                 bus: EventBus | None = None):
        self.session = session
        self.tree_id = tree_id
        self.bus = bus
        self._goal_id: str | None = None
        self._last_heard: float | None = None
        self._cancel_sent = False

    def on_enter(self, ud) -> None:
        self._goal_id = None
        self._last_heard = None
        self._cancel_sent = False

    def _gather_poses(self, ud):
        return []

    def execute_step(self, ud):
        if self._goal_id is None:
            try:
                poses = self._gather_poses(ud)
            except UserDataKeyMissing:
                return "failed"
            try:
                self.session.ensure_connected()
                self._goal_id = self.session.client.send_execute(
                    poses, tree_id=self.tree_id)
            except (TransportError, OSError):
                return "failed"
            self._last_heard = time.monotonic()
            return None
        try:
            messages = self.session.client.poll()
        except TransportError:
            return "failed"
        for message in messages:
            if message.get("id") != self._goal_id:
                continue
            self._last_heard = time.monotonic()
            kind = message["type"]
            if kind == protocol.MSG_EXECUTE_FEEDBACK:
                if self.bus is not None:
                    self.bus.publish("bt_feedback", {
                        "tick": message.get("tick"),
                        "active_nodes": message.get("active_nodes", []),
                        "robot_pose": message.get("robot_pose"),
                        "elapsed_ms": message.get("elapsed_ms"),
                        "dropped": message.get("dropped", 0),
                    })
            elif kind == protocol.MSG_EXECUTE_RESULT:
                return _RESULT_OUTCOME.get(message.get("status"), "failed")
            elif kind == protocol.MSG_REJECT:
                return "failed"
        waited_ms = (time.monotonic() - self._last_heard) * 1000.0
        if waited_ms > self.session.feedback_timeout_ms:
            return "failed"
        return None

    def on_preempt(self, ud) -> None:
        """Cancel the in-flight execution (once) and wait out its result so
        the server is idle again before the machine moves on."""
        if self._goal_id is None:
            return
        if not self._cancel_sent:
            try:
                self.session.client.send_cancel(self._goal_id)
            except TransportError:
                self._goal_id = None
                return
            self._cancel_sent = True
        deadline = time.monotonic() + self.session.feedback_timeout_ms / 1000.0
        while time.monotonic() < deadline:
            try:
                messages = self.session.client.poll()
            except TransportError:
                break
            done = any(m.get("id") == self._goal_id
                       and m["type"] in (protocol.MSG_EXECUTE_RESULT,
                                         protocol.MSG_REJECT)
                       for m in messages)
            if done:
                break
            time.sleep(0.005)
        self._goal_id = None


class BtExecuteGoalState(BtExecuteState):
    """BtExecuteState that ships navigation goals from userdata: the pose
    under "goal", or the full list under "goals" when present. A missing
    goal fails locally without touching the wire."""

    send_goal = True
    input_keys = ("goal",)

    def _gather_poses(self, ud):
        if ud.has("goals"):
            goals = list(ud.get("goals"))
            if goals:
                return goals
        return [ud.get("goal")]

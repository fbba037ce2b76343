"""TCP server that loads and ticks behavior trees on request.

One execution at a time: an execute goal while another is active is
rejected outright, with no result for the rejected id. The blackboard
belongs to the server and survives across goals and loads, so state written
by one tree run (a computed path, say) is visible to the next.

Feedback is best-effort: each connection has a bounded outbound queue and a
slow reader loses oldest feedback first, never results. The count of
feedback messages dropped so far rides along in each feedback's "dropped"
field.
"""

from __future__ import annotations

import socket
import threading
import time
from collections import deque

from ..btree.blackboard import Blackboard, LeafRegistry, TickContext
from ..btree.core import BtError, active_paths, halt, tick_root
from ..btree.status import NodeStatus
from ..btree.xmlio import BtXmlError, DanglingSubTree, parse_bt_xml, validate
from ..nav.world import GridWorld, ObstacleSchedule
from . import protocol

DEFAULT_TICK_MS = 100
DEFAULT_FEEDBACK_QUEUE = 64

_STATUS_WIRE = {NodeStatus.SUCCESS: protocol.RESULT_SUCCESS,
                NodeStatus.FAILURE: protocol.RESULT_FAILURE}


class _ConnWriter:
    """Serialized writes to one client with drop-oldest feedback overflow.

    Results, rejections, and load results always go through; only feedback
    is expendable.
    """

    def __init__(self, sock: socket.socket, limit: int):
        self._sock = sock
        self._limit = limit
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._queue: deque = deque()
        self.dropped = 0
        self._closed = False
        self._thread = threading.Thread(target=self._pump, daemon=True)
        self._thread.start()

    def send(self, message: dict, *, expendable: bool = False) -> None:
        payload = protocol.encode(message)
        with self._cond:
            if self._closed:
                return
            if expendable and len(self._queue) >= self._limit:
                for idx, (_, exp) in enumerate(self._queue):
                    if exp:
                        del self._queue[idx]
                        self.dropped += 1
                        break
                else:
                    self.dropped += 1
                    return
            self._queue.append((payload, expendable))
            self._cond.notify()

    def _pump(self) -> None:
        while True:
            with self._cond:
                while not self._queue and not self._closed:
                    self._cond.wait(timeout=0.5)
                if self._closed and not self._queue:
                    return
                payload, _ = self._queue.popleft()
            try:
                self._sock.sendall(payload)
            except OSError:
                with self._cond:
                    self._closed = True
                    self._queue.clear()
                return

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify()
        self._thread.join(timeout=2.0)


class _Execution:
    def __init__(self, goal_id: str, tree, writer: _ConnWriter):
        self.goal_id = goal_id
        self.tree = tree
        self.writer = writer
        self.cancel = threading.Event()
        self.thread: threading.Thread | None = None


class BtServer:
    def __init__(self, *, host: str = "127.0.0.1",
                 port: int = protocol.DEFAULT_BT_PORT,
                 registry: LeafRegistry | None = None,
                 world: GridWorld | None = None,
                 schedule: ObstacleSchedule | None = None,
                 tick_ms: int = DEFAULT_TICK_MS,
                 feedback_queue: int = DEFAULT_FEEDBACK_QUEUE):
        self.host = host
        self.port = port
        self.registry = registry if registry is not None else LeafRegistry()
        self.world = world
        self.schedule = schedule or ObstacleSchedule()
        self.tick_ms = tick_ms
        self.feedback_queue = feedback_queue
        self.blackboard = Blackboard()
        self._store: dict = {}
        self._docs: list = []
        self._exec_lock = threading.Lock()
        self._active: _Execution | None = None
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._conn_threads: list = []
        self._conns: list = []
        self._stopping = threading.Event()

    # -- lifecycle -----------------------------------------------------

    def start(self) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.host, self.port))
        listener.listen(8)
        # closing a listener does not wake a blocked accept(), so poll
        listener.settimeout(0.25)
        self._listener = listener
        self.port = listener.getsockname()[1]
        self._accept_thread = threading.Thread(target=self._accept_loop,
                                               daemon=True)
        self._accept_thread.start()

    @property
    def address(self) -> tuple:
        return (self.host, self.port)

    def stop(self) -> None:
        self._stopping.set()
        with self._exec_lock:
            active = self._active
        if active is not None:
            active.cancel.set()
            if active.thread is not None:
                active.thread.join(timeout=5.0)
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=2.0)
        for conn in list(self._conns):
            try:
                # shutdown, not close: it interrupts a blocked recv
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        for thread in list(self._conn_threads):
            thread.join(timeout=2.0)

    # -- connections ---------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            self._conns.append(conn)
            thread = threading.Thread(target=self._serve_conn, args=(conn,),
                                      daemon=True)
            self._conn_threads.append(thread)
            thread.start()

    def _serve_conn(self, conn: socket.socket) -> None:
        # feedback and results are tiny frames; Nagle would sit on them
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        writer = _ConnWriter(conn, self.feedback_queue)
        try:
            reader = conn.makefile("r", encoding="utf-8")
            for line in reader:
                if not line.strip():
                    continue
                try:
                    message = protocol.decode_line(line)
                except protocol.ProtocolError as err:
                    writer.send(protocol.reject("", str(err)))
                    continue
                self._dispatch(message, writer)
                if self._stopping.is_set():
                    break
        except OSError:
            pass
        finally:
            writer.close()
            try:
                conn.close()
            except OSError:
                pass
            if conn in self._conns:
                self._conns.remove(conn)

    # -- message handling ------------------------------------------------

    def _dispatch(self, message: dict, writer: _ConnWriter) -> None:
        kind = message["type"]
        goal_id = str(message.get("id", ""))
        if kind == protocol.MSG_LOAD_GOAL:
            self._handle_load(goal_id, message, writer)
        elif kind == protocol.MSG_EXECUTE_GOAL:
            self._handle_execute(goal_id, message, writer)
        elif kind == protocol.MSG_EXECUTE_CANCEL:
            self._handle_cancel(goal_id, writer)
        else:
            writer.send(protocol.reject(goal_id, f"unexpected {kind}"))

    def _handle_load(self, goal_id: str, message: dict,
                     writer: _ConnWriter) -> None:
        xml = message.get("xml", "")
        known = tuple(self._store)
        try:
            doc = parse_bt_xml(xml, external_ids=known)
        except BtXmlError as err:
            writer.send(protocol.load_result(goal_id, False, [str(err)]))
            return
        issues = validate(doc, self.registry, external_ids=known)
        if issues:
            writer.send(protocol.load_result(
                goal_id, False, [str(issue) for issue in issues],
                tree_ids=sorted(doc.trees)))
            return
        self._store.update(doc.trees)
        self._docs.append(doc)
        writer.send(protocol.load_result(goal_id, True,
                                         tree_ids=sorted(doc.trees)))

    def _handle_execute(self, goal_id: str, message: dict,
                        writer: _ConnWriter) -> None:
        if not self._docs:
            writer.send(protocol.reject(goal_id, "no tree loaded"))
            return
        tree_id = message.get("tree_id") or self._docs[-1].main_tree_id
        try:
            poses = protocol.poses_from_wire(message.get("poses", []))
        except (KeyError, TypeError, ValueError) as err:
            writer.send(protocol.reject(goal_id, f"bad poses: {err}"))
            return
        with self._exec_lock:
            if self._active is not None:
                writer.send(protocol.reject(goal_id, "busy"))
                return
            try:
                tree = self._instantiate(tree_id)
            except BtXmlError as err:
                writer.send(protocol.reject(goal_id, str(err)))
                return
            if poses:
                self.blackboard.set("goal", poses[0])
                if len(poses) > 1:
                    self.blackboard.set("goals", poses)
            execution = _Execution(goal_id, tree, writer)
            execution.thread = threading.Thread(
                target=self._run_execution, args=(execution,), daemon=True)
            self._active = execution
            execution.thread.start()

    def _instantiate(self, tree_id: str):
        for doc in reversed(self._docs):
            if tree_id in doc.trees:
                return doc.instantiate(tree_id, external=self._store)
        raise DanglingSubTree(tree_id)

    def _handle_cancel(self, goal_id: str, writer: _ConnWriter) -> None:
        with self._exec_lock:
            active = self._active
        if active is None or active.goal_id != goal_id:
            writer.send(protocol.reject(goal_id, "no such execution"))
            return
        active.cancel.set()

    # -- execution loop ----------------------------------------------------

    def _run_execution(self, execution: _Execution) -> None:
        tree, writer = execution.tree, execution.writer
        ctx = TickContext(cancel=execution.cancel)
        started = time.monotonic()
        period = self.tick_ms / 1000.0
        tick = 0
        status = NodeStatus.RUNNING
        try:
            while True:
                if execution.cancel.is_set() or self._stopping.is_set():
                    halt(tree)
                    self._finish(execution, protocol.RESULT_CANCELED, tick,
                                 started)
                    return
                if self.world is not None:
                    self.schedule.apply(self.world, tick)
                    self.blackboard.set("robot_pose", self.world.robot_pose)
                try:
                    status = tick_root(tree, self.blackboard, self.registry, ctx)
                except BtError:
                    halt(tree)
                    self._finish(execution, protocol.RESULT_FAILURE, tick,
                                 started)
                    return
                tick += 1
                elapsed = (time.monotonic() - started) * 1000.0
                writer.send(protocol.execute_feedback(
                    execution.goal_id, tick, active_paths(tree),
                    self.world.robot_pose if self.world is not None
                    else self.blackboard.snapshot().get("robot_pose"),
                    elapsed, writer.dropped), expendable=True)
                if status.terminal:
                    self._finish(execution, _STATUS_WIRE[status], tick, started)
                    return
                deadline = started + tick * period
                delay = deadline - time.monotonic()
                if delay > 0:
                    # Event.wait so a cancel interrupts the pause instead of
                    # waiting out the tick period.
                    execution.cancel.wait(timeout=delay)
        finally:
            with self._exec_lock:
                if self._active is execution:
                    self._active = None

    def _finish(self, execution: _Execution, status: str, ticks: int,
                started: float) -> None:
        elapsed = (time.monotonic() - started) * 1000.0
        # release the slot before the result leaves: a client that reacts
        # to the result immediately must not draw a busy reject
        with self._exec_lock:
            if self._active is execution:
                self._active = None
        execution.writer.send(protocol.execute_result(
            execution.goal_id, status, ticks, elapsed))

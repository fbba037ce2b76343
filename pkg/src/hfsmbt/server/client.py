"""Polling client for the tree execution server.

Deliberately thread-free: poll() reads whatever bytes have arrived and
returns complete messages, so the caller (a state stepped by the executive)
stays in control of when its own state can change. Transport trouble raises
TransportError / ConnectionLost; a FAILURE result is not an exception, it is
an answer.
"""

from __future__ import annotations

import socket
import time

from . import protocol


class TransportError(Exception):
    pass


class ConnectionLost(TransportError):
    pass


class BtClient:
    def __init__(self, host: str = "127.0.0.1",
                 port: int = protocol.DEFAULT_BT_PORT, *,
                 connect_timeout: float = 5.0):
        self.host = host
        self.port = port
        self.connect_timeout = connect_timeout
        self._sock: socket.socket | None = None
        self._buffer = b""
        self._spillover: list = []

    # -- connection ------------------------------------------------------

    def connect(self) -> None:
        if self._sock is not None:
            return
        try:
            sock = socket.create_connection((self.host, self.port),
                                            timeout=self.connect_timeout)
        except OSError as err:
            raise TransportError(f"connect to {self.host}:{self.port} failed: "
                                 f"{err}") from None
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.setblocking(False)
        self._sock = sock

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None
        self._buffer = b""

    @property
    def connected(self) -> bool:
        return self._sock is not None

    # -- IO ----------------------------------------------------------------

    def _send(self, message: dict) -> None:
        if self._sock is None:
            raise TransportError("not connected")
        payload = protocol.encode(message)
        try:
            self._sock.sendall(payload)
        except OSError as err:
            self.close()
            raise ConnectionLost(str(err)) from None

    def poll(self) -> list:
        """All complete messages received since the last poll; never blocks."""
        if self._sock is None:
            raise TransportError("not connected")
        messages, self._spillover = self._spillover, []
        while True:
            try:
                chunk = self._sock.recv(65536)
            except BlockingIOError:
                break
            except OSError as err:
                self.close()
                raise ConnectionLost(str(err)) from None
            if chunk == b"":
                self.close()
                raise ConnectionLost("server closed the connection")
            self._buffer += chunk
        while b"\n" in self._buffer:
            line, self._buffer = self._buffer.split(b"\n", 1)
            if line.strip():
                messages.append(protocol.decode_line(line))
        return messages

    def wait_for(self, predicate, timeout: float, *,
                 poll_interval: float = 0.01) -> dict:
        """Poll until a message satisfies predicate; unmatched messages are
        buffered and re-delivered by later poll() calls via _spillover."""
        deadline = time.monotonic() + timeout
        while True:
            batch = self.poll()
            for index, message in enumerate(batch):
                if predicate(message):
                    # keep the rest of the batch for later polls
                    self._spillover.extend(batch[index + 1:])
                    return message
                self._spillover.append(message)
            if time.monotonic() >= deadline:
                raise TransportError(f"timed out after {timeout:.1f}s")
            time.sleep(poll_interval)

    # -- protocol helpers -------------------------------------------------

    def send_load(self, xml: str, goal_id: str | None = None) -> str:
        goal_id = goal_id or protocol.new_goal_id()
        self._send(protocol.load_goal(goal_id, xml))
        return goal_id

    def send_execute(self, poses, tree_id: str = "",
                     goal_id: str | None = None) -> str:
        goal_id = goal_id or protocol.new_goal_id()
        self._send(protocol.execute_goal(goal_id, poses, tree_id))
        return goal_id

    def send_cancel(self, goal_id: str) -> None:
        self._send(protocol.execute_cancel(goal_id))

    def load(self, xml: str, *, timeout: float = 5.0) -> dict:
        """Send a load goal and block (polling) until its result."""
        goal_id = self.send_load(xml)
        return self.wait_for(
            lambda m: m.get("id") == goal_id and m["type"] in
            (protocol.MSG_LOAD_RESULT, protocol.MSG_REJECT), timeout)

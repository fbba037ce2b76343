"""WebSocket mirror of the run: events out, operator commands in.

A console connects to /mirror and first receives a snapshot frame holding
every event so far, then individual event frames as the run continues. The
two are handed over atomically against the bus, so the combined stream is
gapless and duplicate-free and replay() reconstructs the run exactly.

Inbound frames are operator commands (set_autonomy, confirm_transition,
force_transition, preempt, goal, end_goals). They are queued to the
executive; the observable acknowledgement is the command_ack event on the
stream itself. Malformed frames get a direct error frame and change nothing.

The same port also answers plain HTTP GET /world with the gridworld
geometry, which is all a console needs to draw the map before events arrive.
"""

from __future__ import annotations

import http
import json
import threading

from websockets.http11 import Response
from websockets.sync.server import serve

from .fsm.commands import CommandError, from_wire
from .server.protocol import DEFAULT_MIRROR_PORT

MIRROR_PATH = "/mirror"
WORLD_PATH = "/world"


def world_geometry(world) -> dict:
    if world is None:
        return {"width": 0, "height": 0, "cell_size": 1.0,
                "static_obstacles": [], "dynamic_obstacles": [],
                "robot_pose": None}
    return {
        "width": world.width,
        "height": world.height,
        "cell_size": world.cell_size,
        "static_obstacles": sorted(list(c) for c in world.static_obstacles),
        "dynamic_obstacles": sorted(list(c) for c in world.dynamic_obstacles),
        "robot_pose": world.robot_pose.to_wire(),
    }


class MirrorServer:
    def __init__(self, executive, *, host: str = "127.0.0.1",
                 port: int = DEFAULT_MIRROR_PORT, world=None):
        self.executive = executive
        self.host = host
        self.port = port
        self.world = world
        self._server = None
        self._thread: threading.Thread | None = None

    # -- lifecycle -----------------------------------------------------

    def start(self) -> None:
        self._server = serve(self._handle, self.host, self.port,
                             process_request=self._process_request)
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=2.0)

    @property
    def address(self) -> tuple:
        return (self.host, self.port)

    # -- plain HTTP ------------------------------------------------------

    def _process_request(self, connection, request):
        if request.path == WORLD_PATH:
            body = json.dumps(world_geometry(self.world)).encode("utf-8")
            return Response(http.HTTPStatus.OK, "OK",
                            _json_headers(len(body)), body)
        if request.path != MIRROR_PATH:
            body = b'{"error":"not found"}'
            return Response(http.HTTPStatus.NOT_FOUND, "Not Found",
                            _json_headers(len(body)), body)
        return None

    # -- websocket ---------------------------------------------------------

    def _handle(self, connection) -> None:
        snapshot, sub = self.executive.bus.snapshot_then_subscribe()
        try:
            connection.send(json.dumps({
                "type": "snapshot",
                "events": [e.to_wire() for e in snapshot],
            }))
            while True:
                event = sub.get(timeout=0.02)
                if event is not None:
                    connection.send(json.dumps(
                        {"type": "event", "event": event.to_wire()}))
                try:
                    raw = connection.recv(timeout=0)
                except TimeoutError:
                    continue
                self._handle_inbound(connection, raw)
        except Exception:
            pass
        finally:
            sub.close()

    def _handle_inbound(self, connection, raw) -> None:
        try:
            payload = json.loads(raw)
            command = from_wire(payload)
        except (ValueError, KeyError, TypeError, CommandError) as err:
            connection.send(json.dumps({"type": "error", "detail": str(err)}))
            return
        self.executive.submit(command)


def _json_headers(length: int):
    from websockets.datastructures import Headers
    return Headers([("Content-Type", "application/json"),
                    ("Content-Length", str(length))])

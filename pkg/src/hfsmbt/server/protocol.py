"""Wire protocol for the tree execution server.

Newline-delimited JSON over TCP, one object per line, each carrying a
"type". A conversation is: load goals and execute goals flow in; the server
answers a load with bt_load_result, an execute with a feedback stream and
exactly one bt_execute_result, and anything it cannot take with bt_reject.
Nothing follows a result for the same goal id.
"""

from __future__ import annotations

import json
import uuid

from ..btree.blackboard import Pose

DEFAULT_BT_PORT = 7801
DEFAULT_MIRROR_PORT = 7802

MSG_LOAD_GOAL = "bt_load_goal"
MSG_LOAD_RESULT = "bt_load_result"
MSG_EXECUTE_GOAL = "bt_execute_goal"
MSG_EXECUTE_FEEDBACK = "bt_execute_feedback"
MSG_EXECUTE_CANCEL = "bt_execute_cancel"
MSG_EXECUTE_RESULT = "bt_execute_result"
MSG_REJECT = "bt_reject"

MESSAGE_TYPES = (
    MSG_LOAD_GOAL,
    MSG_LOAD_RESULT,
    MSG_EXECUTE_GOAL,
    MSG_EXECUTE_FEEDBACK,
    MSG_EXECUTE_CANCEL,
    MSG_EXECUTE_RESULT,
    MSG_REJECT,
)

RESULT_SUCCESS = "SUCCESS"
RESULT_FAILURE = "FAILURE"
RESULT_CANCELED = "CANCELED"


class ProtocolError(ValueError):
    pass


def new_goal_id() -> str:
    return uuid.uuid4().hex[:8]


def encode(message: dict) -> bytes:
    kind = message.get("type")
    if kind not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {kind!r}")
    return (json.dumps(message, separators=(",", ":")) + "\n").encode("utf-8")


def decode_line(line) -> dict:
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    try:
        message = json.loads(line)
    except json.JSONDecodeError as err:
        raise ProtocolError(f"bad JSON: {err}") from None
    if not isinstance(message, dict):
        raise ProtocolError("message is not an object")
    if message.get("type") not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {message.get('type')!r}")
    return message


def poses_to_wire(poses) -> list:
    return [p.to_wire() if isinstance(p, Pose) else dict(p) for p in poses]


def poses_from_wire(payload) -> list:
    return [Pose.from_wire(entry) for entry in payload]


# -- builders ---------------------------------------------------------------

def load_goal(goal_id: str, xml: str) -> dict:
    return {"type": MSG_LOAD_GOAL, "id": goal_id, "xml": xml}


def load_result(goal_id: str, ok: bool, errors=(), tree_ids=()) -> dict:
    return {"type": MSG_LOAD_RESULT, "id": goal_id, "ok": ok,
            "errors": list(errors), "tree_ids": list(tree_ids)}


def execute_goal(goal_id: str, poses, tree_id: str = "") -> dict:
    return {"type": MSG_EXECUTE_GOAL, "id": goal_id, "tree_id": tree_id,
            "poses": poses_to_wire(poses)}


def execute_feedback(goal_id: str, tick: int, active_nodes, robot_pose,
                     elapsed_ms: float, dropped: int) -> dict:
    return {"type": MSG_EXECUTE_FEEDBACK, "id": goal_id, "tick": tick,
            "active_nodes": list(active_nodes),
            "robot_pose": robot_pose.to_wire() if isinstance(robot_pose, Pose)
            else robot_pose,
            "elapsed_ms": elapsed_ms, "dropped": dropped}


def execute_result(goal_id: str, status: str, ticks: int,
                   elapsed_ms: float) -> dict:
    if status not in (RESULT_SUCCESS, RESULT_FAILURE, RESULT_CANCELED):
        raise ProtocolError(f"bad result status {status!r}")
    return {"type": MSG_EXECUTE_RESULT, "id": goal_id, "status": status,
            "ticks": ticks, "elapsed_ms": elapsed_ms}


def execute_cancel(goal_id: str) -> dict:
    return {"type": MSG_EXECUTE_CANCEL, "id": goal_id}


def reject(goal_id: str, reason: str) -> dict:
    return {"type": MSG_REJECT, "id": goal_id, "reason": reason}

"""Tick status algebra shared by every node."""

from __future__ import annotations

import enum


class NodeStatus(enum.Enum):
    """Result of ticking a node.

    IDLE is the resting state before the first tick and after a halt; a tick
    never returns it. Conditions never return RUNNING.
    """

    IDLE = "idle"
    RUNNING = "running"
    SUCCESS = "success"
    FAILURE = "failure"

    @property
    def terminal(self) -> bool:
        return self in (NodeStatus.SUCCESS, NodeStatus.FAILURE)


def invert(status: NodeStatus) -> NodeStatus:
    """Swap Success and Failure; Running and Idle are fixed points."""
    if status is NodeStatus.SUCCESS:
        return NodeStatus.FAILURE
    if status is NodeStatus.FAILURE:
        return NodeStatus.SUCCESS
    return status

"""Networked tree execution: wire protocol, server, and polling client."""

from .client import BtClient, ConnectionLost, TransportError
from .protocol import (
    DEFAULT_BT_PORT,
    DEFAULT_MIRROR_PORT,
    MESSAGE_TYPES,
    ProtocolError,
    RESULT_CANCELED,
    RESULT_FAILURE,
    RESULT_SUCCESS,
    new_goal_id,
)
from .service import DEFAULT_FEEDBACK_QUEUE, DEFAULT_TICK_MS, BtServer

__all__ = [
    "BtClient",
    "BtServer",
    "ConnectionLost",
    "DEFAULT_BT_PORT",
    "DEFAULT_FEEDBACK_QUEUE",
    "DEFAULT_MIRROR_PORT",
    "DEFAULT_TICK_MS",
    "MESSAGE_TYPES",
    "ProtocolError",
    "RESULT_CANCELED",
    "RESULT_FAILURE",
    "RESULT_SUCCESS",
    "TransportError",
    "new_goal_id",
]

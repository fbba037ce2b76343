"""Shared blackboard, port scoping, leaf registry, and tick context.

Blackboard values are plain Python data: bool, int, float, str, Pose, or a
list of Pose (a path is an ordered pose list). Reads of absent keys raise
instead of defaulting so a mistyped port name fails loudly.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .status import NodeStatus


@dataclass(frozen=True)
class Pose:
    """2D pose: meters for x/y, radians for heading."""

    x: float
    y: float
    heading: float = 0.0

    def to_wire(self) -> dict:
        return {"x": self.x, "y": self.y, "heading": self.heading}

    @classmethod
    def from_wire(cls, obj: dict) -> "Pose":
        return cls(float(obj["x"]), float(obj["y"]), float(obj.get("heading", 0.0)))


class BlackboardKeyMissing(KeyError):
    def __init__(self, key: str):
        super().__init__(key)
        self.key = key

    def __str__(self):
        return f"blackboard key {self.key!r} is not set"


class PortBindingError(Exception):
    """Write attempted through a literal (constant) port binding."""


class Blackboard:
    """Key-value store shared by every node of a running tree.

    Writes may come from a simulator thread between ticks, so access is
    guarded by a lock; within a tick, reads observe earlier writes.
    """

    def __init__(self):
        self._entries: dict = {}
        self._lock = threading.Lock()

    def get(self, key: str):
        with self._lock:
            if key not in self._entries:
                raise BlackboardKeyMissing(key)
            return self._entries[key]

    def set(self, key: str, value) -> None:
        with self._lock:
            self._entries[key] = value

    def has(self, key: str) -> bool:
        with self._lock:
            return key in self._entries

    def delete(self, key: str) -> None:
        with self._lock:
            self._entries.pop(key, None)

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self._entries)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()


_REMAP = "remap"
_LITERAL = "literal"


class ScopedBlackboard:
    """Blackboard view that resolves local port names.

    A binding of the XML form ``{key}`` remaps the local name onto the parent
    key; any other binding string is a read-only literal. Unbound names pass
    straight through to the parent store.
    """

    def __init__(self, parent, bindings: dict):
        self._parent = parent
        self._bindings = bindings

    @classmethod
    def for_ports(cls, parent, ports: dict) -> "ScopedBlackboard":
        bindings = {}
        for local, raw in ports.items():
            if isinstance(raw, str) and raw.startswith("{") and raw.endswith("}"):
                bindings[local] = (_REMAP, raw[1:-1])
            else:
                bindings[local] = (_LITERAL, raw)
        return cls(parent, bindings)

    def get(self, key: str):
        binding = self._bindings.get(key)
        if binding is None:
            return self._parent.get(key)
        mode, target = binding
        if mode == _LITERAL:
            return target
        return self._parent.get(target)

    def set(self, key: str, value) -> None:
        binding = self._bindings.get(key)
        if binding is None:
            self._parent.set(key, value)
            return
        mode, target = binding
        if mode == _LITERAL:
            raise PortBindingError(f"port {key!r} is bound to a literal")
        self._parent.set(target, value)

    def has(self, key: str) -> bool:
        binding = self._bindings.get(key)
        if binding is None:
            return self._parent.has(key)
        mode, target = binding
        return True if mode == _LITERAL else self._parent.has(target)


@dataclass
class LeafImpl:
    """Registered leaf behavior: the tick callable plus an optional hook to
    run when the leaf is halted while Running."""

    fn: Callable
    on_halt: Optional[Callable[[], None]] = None
    input_ports: tuple = ()


class LeafRegistry:
    """Maps Action/Condition ids to their implementations."""

    def __init__(self):
        self._impls: dict[str, LeafImpl] = {}

    def register(self, leaf_id: str, fn: Callable, *,
                 on_halt: Optional[Callable[[], None]] = None,
                 input_ports=()) -> None:
        self._impls[leaf_id] = LeafImpl(fn, on_halt, tuple(input_ports))

    def lookup(self, leaf_id: str) -> Optional[LeafImpl]:
        return self._impls.get(leaf_id)

    def __contains__(self, leaf_id: str) -> bool:
        return leaf_id in self._impls

    def ids(self):
        return sorted(self._impls)


_STATUS_LETTER = {
    NodeStatus.SUCCESS: "S",
    NodeStatus.FAILURE: "F",
    NodeStatus.RUNNING: "R",
}


@dataclass
class TickContext:
    """Per-execution context handed to every leaf.

    cancel is settable from any thread; the engine and long-running leaves
    sample it at tick boundaries. trace_sink, when set, receives one line per
    leaf invocation: ``tick=<n> node=<name> status=<S|F|R>``.
    """

    tick_index: int = 0
    cancel: threading.Event = field(default_factory=threading.Event)
    trace_sink: Optional[Callable[[str], None]] = None
    _started: float = field(default_factory=time.monotonic)

    @property
    def cancel_requested(self) -> bool:
        return self.cancel.is_set()

    @property
    def elapsed_ms(self) -> int:
        return int((time.monotonic() - self._started) * 1000)

    def trace(self, node_name: str, status: NodeStatus) -> None:
        if self.trace_sink is not None:
            self.trace_sink(
                f"tick={self.tick_index} node={node_name} "
                f"status={_STATUS_LETTER[status]}"
            )

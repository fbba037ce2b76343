"""Behavior-tree node model and tick engine.

Trees are passive data: leaves carry only an implementation id plus port
bindings, and the callable behind that id is looked up in a LeafRegistry at
tick time. This keeps parsed trees serializable and lets the same tree run
against different worlds.

Composite semantics:
    Sequence / Fallback           memory variants (resume at the cursor)
    ReactiveSequence / -Fallback  restart from the first child every tick
    Parallel                      tick all children, threshold decides
    Repeat / Retry                decorators cycling their single child
"""

from __future__ import annotations

from typing import Callable, Optional

from .blackboard import (
    Blackboard,
    BlackboardKeyMissing,
    LeafRegistry,
    ScopedBlackboard,
    TickContext,
)
from .status import NodeStatus

INFINITE = -1  # num_cycles / num_attempts value meaning "no limit"


class BtError(Exception):
    """Base class for tree construction and execution errors."""


class UnregisteredLeaf(BtError):
    def __init__(self, leaf_id: str):
        super().__init__(f"no leaf registered for id {leaf_id!r}")
        self.leaf_id = leaf_id


class ConditionReturnedRunning(BtError):
    def __init__(self, leaf_id: str):
        super().__init__(f"condition {leaf_id!r} returned Running")
        self.leaf_id = leaf_id


class InvalidThreshold(BtError):
    def __init__(self, threshold: int, child_count: int):
        super().__init__(
            f"parallel success_threshold {threshold} out of range for "
            f"{child_count} children"
        )
        self.threshold = threshold
        self.child_count = child_count


class TreeStructureError(BtError):
    """Raised when a node is constructed with an illegal child list."""


# ---------------------------------------------------------------------------
# Pure status reductions. These are the single-tick truth tables; the stateful
# composites below agree with them whenever all children are ticked fresh.
# ---------------------------------------------------------------------------

def reduce_sequence(statuses) -> NodeStatus:
    """Left-to-right scan: first non-Success child decides, else Success."""
    for status in statuses:
        if status is not NodeStatus.SUCCESS:
            return status
    return NodeStatus.SUCCESS


def reduce_fallback(statuses) -> NodeStatus:
    """Left-to-right scan: first non-Failure child decides, else Failure."""
    for status in statuses:
        if status is not NodeStatus.FAILURE:
            return status
    return NodeStatus.FAILURE


def reduce_parallel(success_threshold: int, statuses) -> NodeStatus:
    """Count-based reduction: Success at >= threshold successes, Failure once
    too many children have failed for the threshold to still be reachable."""
    statuses = list(statuses)
    total = len(statuses)
    if not 1 <= success_threshold <= total:
        raise InvalidThreshold(success_threshold, total)
    succeeded = sum(1 for s in statuses if s is NodeStatus.SUCCESS)
    failed = sum(1 for s in statuses if s is NodeStatus.FAILURE)
    if succeeded >= success_threshold:
        return NodeStatus.SUCCESS
    if failed > total - success_threshold:
        return NodeStatus.FAILURE
    return NodeStatus.RUNNING


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------

class BtNode:
    """Base node: a name, ordered children, and per-tick runtime status."""

    kind = "node"

    def __init__(self, name: str = "", children: Optional[list] = None):
        self.name = name or self.kind
        self.children: list[BtNode] = list(children or [])
        self.status = NodeStatus.IDLE

    # -- structure ---------------------------------------------------------

    def copy(self) -> "BtNode":
        """Fresh instance with Idle runtime state, recursively."""
        raise NotImplementedError

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()

    # -- execution ---------------------------------------------------------

    def tick(self, bb: Blackboard, registry: LeafRegistry, ctx: TickContext) -> NodeStatus:
        self.status = self._tick(bb, registry, ctx)
        return self.status

    def _tick(self, bb, registry, ctx) -> NodeStatus:
        raise NotImplementedError

    def halt(self) -> None:
        """Reset this subtree to Idle. Running leaves get their halt hook."""
        for child in self.children:
            child.halt()
        self._on_halt()
        self.status = NodeStatus.IDLE

    def _on_halt(self) -> None:
        pass

    def __repr__(self):
        return f"<{type(self).__name__} {self.name!r} {self.status.name}>"


class ActionNode(BtNode):
    """Leaf that may change world state; resolved via the registry."""

    kind = "Action"

    def __init__(self, leaf_id: str, name: str = "", ports: Optional[dict] = None):
        super().__init__(name or leaf_id)
        self.leaf_id = leaf_id
        self.ports = dict(ports or {})
        self._active_impl = None  # held while Running so halt() can hook it

    def copy(self):
        return type(self)(self.leaf_id, self.name, dict(self.ports))

    def _leaf_view(self, bb):
        return ScopedBlackboard.for_ports(bb, self.ports) if self.ports else bb

    def _tick(self, bb, registry, ctx):
        impl = registry.lookup(self.leaf_id)
        if impl is None:
            raise UnregisteredLeaf(self.leaf_id)
        status = impl.fn(self._leaf_view(bb), ctx)
        if not isinstance(status, NodeStatus) or status is NodeStatus.IDLE:
            raise BtError(f"leaf {self.leaf_id!r} returned invalid status {status!r}")
        self._active_impl = impl if status is NodeStatus.RUNNING else None
        ctx.trace(self.name, status)
        return status

    def _on_halt(self):
        if self.status is NodeStatus.RUNNING and self._active_impl is not None:
            if self._active_impl.on_halt is not None:
                self._active_impl.on_halt()
        self._active_impl = None


class ConditionNode(ActionNode):
    """Leaf that only reports on world state; Running is a contract error."""

    kind = "Condition"

    def _tick(self, bb, registry, ctx):
        status = super()._tick(bb, registry, ctx)
        if status is NodeStatus.RUNNING:
            raise ConditionReturnedRunning(self.leaf_id)
        return status


class _Composite(BtNode):
    def __init__(self, children, name: str = ""):
        children = list(children)
        if not children:
            raise TreeStructureError(f"{self.kind} requires at least one child")
        super().__init__(name, children)


class SequenceNode(_Composite):
    """Memory sequence: resumes at the first not-yet-succeeded child."""

    kind = "Sequence"

    def __init__(self, children, name: str = ""):
        super().__init__(children, name)
        self.cursor = 0

    def copy(self):
        return type(self)([c.copy() for c in self.children], self.name)

    def _tick(self, bb, registry, ctx):
        while self.cursor < len(self.children):
            status = self.children[self.cursor].tick(bb, registry, ctx)
            if status is NodeStatus.RUNNING:
                return NodeStatus.RUNNING
            if status is NodeStatus.FAILURE:
                self._settle()
                return NodeStatus.FAILURE
            self.cursor += 1
        self._settle()
        return NodeStatus.SUCCESS

    def _settle(self):
        # terminal result: children go back to Idle so a re-tick starts fresh
        for child in self.children:
            child.halt()
        self.cursor = 0

    def _on_halt(self):
        self.cursor = 0


class FallbackNode(SequenceNode):
    """Memory fallback: advances past failed children, stops on Success."""

    kind = "Fallback"

    def _tick(self, bb, registry, ctx):
        while self.cursor < len(self.children):
            status = self.children[self.cursor].tick(bb, registry, ctx)
            if status is NodeStatus.RUNNING:
                return NodeStatus.RUNNING
            if status is NodeStatus.SUCCESS:
                self._settle()
                return NodeStatus.SUCCESS
            self.cursor += 1
        self._settle()
        return NodeStatus.FAILURE


class ReactiveSequenceNode(_Composite):
    """Restarts from child 0 every tick so conditions are re-checked."""

    kind = "ReactiveSequence"

    def copy(self):
        return type(self)([c.copy() for c in self.children], self.name)

    def _tick(self, bb, registry, ctx):
        for index, child in enumerate(self.children):
            status = child.tick(bb, registry, ctx)
            if status is NodeStatus.RUNNING:
                self._halt_after(index)
                return NodeStatus.RUNNING
            if status is NodeStatus.FAILURE:
                self._halt_after(index)
                child.halt()
                return NodeStatus.FAILURE
        for child in self.children:
            child.halt()
        return NodeStatus.SUCCESS

    def _halt_after(self, index):
        # children past the deciding one may still be Running from an earlier
        # tick where a now-changed condition let the tick reach further right
        for child in self.children[index + 1:]:
            child.halt()


class ReactiveFallbackNode(ReactiveSequenceNode):
    kind = "ReactiveFallback"

    def _tick(self, bb, registry, ctx):
        for index, child in enumerate(self.children):
            status = child.tick(bb, registry, ctx)
            if status is NodeStatus.RUNNING:
                self._halt_after(index)
                return NodeStatus.RUNNING
            if status is NodeStatus.SUCCESS:
                self._halt_after(index)
                child.halt()
                return NodeStatus.SUCCESS
        for child in self.children:
            child.halt()
        return NodeStatus.FAILURE


class ParallelNode(_Composite):
    """Ticks every unfinished child each tick; terminal children keep their
    result until the threshold decides, then still-Running children are
    halted so no leaf is left orphaned."""

    kind = "Parallel"

    def __init__(self, success_threshold: int, children, name: str = ""):
        super().__init__(children, name)
        if not 1 <= success_threshold <= len(self.children):
            raise InvalidThreshold(success_threshold, len(self.children))
        self.success_threshold = success_threshold

    def copy(self):
        return type(self)(self.success_threshold, [c.copy() for c in self.children], self.name)

    def _tick(self, bb, registry, ctx):
        for child in self.children:
            if child.status in (NodeStatus.IDLE, NodeStatus.RUNNING):
                child.tick(bb, registry, ctx)
        result = reduce_parallel(
            self.success_threshold, [c.status for c in self.children]
        )
        if result is not NodeStatus.RUNNING:
            for child in self.children:
                child.halt()
        return result


class _Decorator(BtNode):
    def __init__(self, child: BtNode, name: str = ""):
        if child is None:
            raise TreeStructureError(f"{self.kind} requires a child")
        super().__init__(name, [child])

    @property
    def child(self) -> BtNode:
        return self.children[0]


class RepeatNode(_Decorator):
    """Re-ticks the child after each Success; fails as soon as the child
    fails. Finishing num_cycles successful cycles yields Success; -1 means
    repeat without limit."""

    kind = "Repeat"

    def __init__(self, num_cycles: int, child: BtNode, name: str = ""):
        super().__init__(child, name)
        self.num_cycles = num_cycles
        self.completed = 0

    def copy(self):
        return type(self)(self.num_cycles, self.child.copy(), self.name)

    def _tick(self, bb, registry, ctx):
        status = self.child.tick(bb, registry, ctx)
        if status is NodeStatus.RUNNING:
            return NodeStatus.RUNNING
        if status is NodeStatus.FAILURE:
            self.completed = 0
            self.child.halt()
            return NodeStatus.FAILURE
        self.completed += 1
        if self.num_cycles != INFINITE and self.completed >= self.num_cycles:
            self.completed = 0
            self.child.halt()
            return NodeStatus.SUCCESS
        self.child.halt()  # next cycle starts on the next root tick
        return NodeStatus.RUNNING

    def _on_halt(self):
        self.completed = 0


class RetryNode(_Decorator):
    """Re-ticks the child after each Failure; succeeds as soon as the child
    succeeds, fails after num_attempts failures (-1 retries forever)."""

    kind = "Retry"

    def __init__(self, num_attempts: int, child: BtNode, name: str = ""):
        super().__init__(child, name)
        self.num_attempts = num_attempts
        self.failed = 0

    def copy(self):
        return type(self)(self.num_attempts, self.child.copy(), self.name)

    def _tick(self, bb, registry, ctx):
        status = self.child.tick(bb, registry, ctx)
        if status is NodeStatus.RUNNING:
            return NodeStatus.RUNNING
        if status is NodeStatus.SUCCESS:
            self.failed = 0
            self.child.halt()
            return NodeStatus.SUCCESS
        self.failed += 1
        if self.num_attempts != INFINITE and self.failed >= self.num_attempts:
            self.failed = 0
            self.child.halt()
            return NodeStatus.FAILURE
        self.child.halt()
        return NodeStatus.RUNNING

    def _on_halt(self):
        self.failed = 0


class SubTreeNode(BtNode):
    """Reference to another tree by id. Parsed documents leave it unlinked;
    instantiation attaches a fresh copy of the referenced tree as the single
    child. Port remaps scope the shared blackboard for the inner tree."""

    kind = "SubTree"

    def __init__(self, tree_id: str, remaps: Optional[dict] = None, name: str = ""):
        super().__init__(name or tree_id)
        self.tree_id = tree_id
        self.remaps = dict(remaps or {})

    def copy(self):
        node = type(self)(self.tree_id, dict(self.remaps), self.name)
        node.children = [c.copy() for c in self.children]
        return node

    @property
    def linked(self) -> bool:
        return bool(self.children)

    def link(self, root: BtNode) -> None:
        self.children = [root]

    def _tick(self, bb, registry, ctx):
        if not self.linked:
            raise BtError(f"subtree {self.tree_id!r} was never linked")
        view = ScopedBlackboard.for_ports(bb, self.remaps) if self.remaps else bb
        return self.children[0].tick(view, registry, ctx)


# ---------------------------------------------------------------------------
# Root-level operations
# ---------------------------------------------------------------------------

def tick_root(tree: BtNode, bb: Blackboard, registry: LeafRegistry,
              ctx: TickContext) -> NodeStatus:
    """Advance the tick counter and propagate one tick from the root."""
    ctx.tick_index += 1
    return tree.tick(bb, registry, ctx)


def halt(node: BtNode) -> None:
    node.halt()


def backchain(goal_condition: BtNode, achieving_subtree: BtNode) -> FallbackNode:
    """Wrap a goal condition in a fallback with the subtree that achieves it:
    the tree succeeds immediately while the condition already holds."""
    return FallbackNode([goal_condition, achieving_subtree],
                        name=f"achieve_{goal_condition.name}")


def active_paths(tree: BtNode) -> list[str]:
    """Slash-joined name paths of the deepest Running nodes (the frontier a
    feedback consumer cares about)."""
    found: list[str] = []

    def visit(node: BtNode, prefix: str):
        if node.status is not NodeStatus.RUNNING:
            return
        path = f"{prefix}/{node.name}" if prefix else node.name
        running_children = [c for c in node.children if c.status is NodeStatus.RUNNING]
        if not running_children:
            found.append(path)
        for child in running_children:
            visit(child, path)

    visit(tree, "")
    return found


def same_structure(a: BtNode, b: BtNode) -> bool:
    """Structural equality ignoring runtime state."""
    if type(a) is not type(b) or a.name != b.name:
        return False
    if isinstance(a, ActionNode):
        if a.leaf_id != b.leaf_id or a.ports != b.ports:
            return False
    if isinstance(a, ParallelNode) and a.success_threshold != b.success_threshold:
        return False
    if isinstance(a, RepeatNode) and a.num_cycles != b.num_cycles:
        return False
    if isinstance(a, RetryNode) and a.num_attempts != b.num_attempts:
        return False
    if isinstance(a, SubTreeNode):
        if a.tree_id != b.tree_id or a.remaps != b.remaps:
            return False
    if len(a.children) != len(b.children):
        return False
    return all(same_structure(x, y) for x, y in zip(a.children, b.children))

"""Navigation leaf implementations bound to a GridWorld.

Each leaf is a small callable class; ticking state (path cursors, wait
budgets, retry counters) lives on the instance and is cleared by the halt
hook, so a halted leaf restarts clean. `make_nav_registry` wires one set of
instances into a LeafRegistry for a given world.
"""

from __future__ import annotations

from ..btree.blackboard import Blackboard, BlackboardKeyMissing, LeafRegistry, Pose
from ..btree.status import NodeStatus
from .world import (
    DEFAULT_WAIT_TICKS,
    FollowResult,
    GridWorld,
    PlanningError,
    WaitTimer,
    follow_path_step,
    plan_path,
    recovery_step,
)

DEFAULT_BLOCK_TICKS = 3


def _as_pose(value) -> Pose:
    if isinstance(value, Pose):
        return value
    if isinstance(value, dict):
        return Pose.from_wire(value)
    raise TypeError(f"expected a pose, got {type(value).__name__}")


class ComputePathToPose:
    """Plan from the robot's cell to the pose under the "goal" port and
    write the result to "path". Counts invocations so tests can assert how
    often planning actually ran."""

    def __init__(self, world: GridWorld):
        self.world = world
        self.invocations = 0
        self.failures = 0

    def __call__(self, bb: Blackboard, ctx) -> NodeStatus:
        self.invocations += 1
        goal = _as_pose(bb.get("goal"))
        try:
            path = plan_path(self.world, self.world.robot_pose, goal)
        except (PlanningError, ValueError):
            self.failures += 1
            return NodeStatus.FAILURE
        bb.set("path", path)
        return NodeStatus.SUCCESS


class FollowPath:
    """Walk the robot along the "path" port one cell per tick.

    Transient blockage holds RUNNING; more than block_ticks consecutive
    blocked ticks is FAILURE, handing the problem to recovery.
    """

    def __init__(self, world: GridWorld, block_ticks: int = DEFAULT_BLOCK_TICKS):
        self.world = world
        self.block_ticks = block_ticks
        self.cursor = -1
        self.blocked_for = 0
        self.path = None
        self.invocations = 0

    def reset(self) -> None:
        self.cursor = -1
        self.blocked_for = 0
        self.path = None

    def __call__(self, bb: Blackboard, ctx) -> NodeStatus:
        if self.path is None:
            self.invocations += 1
            path = bb.get("path")
            if not path:
                return NodeStatus.FAILURE
            self.path = list(path)
            robot = self.world.robot_cell
            cells = [self.world.cell_of(p) for p in self.path]
            self.cursor = cells.index(robot) if robot in cells else 0
            self.blocked_for = 0

        result = follow_path_step(self.world, self.path, self.cursor)
        if result == FollowResult.ARRIVED:
            if self.cursor < len(self.path) - 1:
                self.cursor += 1
            self.reset()
            return NodeStatus.SUCCESS
        if result == FollowResult.ADVANCED:
            self.cursor += 1
            self.blocked_for = 0
            return NodeStatus.RUNNING
        self.blocked_for += 1
        if self.blocked_for > self.block_ticks:
            self.reset()
            return NodeStatus.FAILURE
        return NodeStatus.RUNNING


class GoalReached:
    """Condition: the robot stands on the cell of the "goal" port."""

    def __init__(self, world: GridWorld):
        self.world = world

    def __call__(self, bb: Blackboard, ctx) -> NodeStatus:
        try:
            goal = _as_pose(bb.get("goal"))
        except BlackboardKeyMissing:
            return NodeStatus.FAILURE
        if self.world.robot_cell == self.world.cell_of(goal):
            return NodeStatus.SUCCESS
        return NodeStatus.FAILURE


class PathBlocked:
    """Condition: the cell ahead on the current "path" is occupied."""

    def __init__(self, world: GridWorld):
        self.world = world

    def __call__(self, bb: Blackboard, ctx) -> NodeStatus:
        try:
            path = bb.get("path")
        except BlackboardKeyMissing:
            return NodeStatus.FAILURE
        cells = [self.world.cell_of(p) for p in path]
        robot = self.world.robot_cell
        if robot in cells:
            idx = cells.index(robot)
            if idx + 1 < len(cells) and self.world.occupied(cells[idx + 1]):
                return NodeStatus.SUCCESS
        return NodeStatus.FAILURE


class ClearObstacles:
    def __init__(self, world: GridWorld):
        self.world = world
        self.invocations = 0

    def __call__(self, bb: Blackboard, ctx) -> NodeStatus:
        self.invocations += 1
        return recovery_step(self.world, "clear")


class WaitRecovery:
    def __init__(self, world: GridWorld, ticks: int = DEFAULT_WAIT_TICKS):
        self.world = world
        self.timer = WaitTimer(ticks=ticks)
        self.invocations = 0

    def reset(self) -> None:
        self.timer.remaining = -1

    def __call__(self, bb: Blackboard, ctx) -> NodeStatus:
        if self.timer.remaining < 0:
            self.invocations += 1
            try:
                self.timer.ticks = int(bb.get("ticks"))
            except BlackboardKeyMissing:
                pass
        return recovery_step(self.world, "wait", self.timer)


class Backup:
    def __init__(self, world: GridWorld):
        self.world = world
        self.invocations = 0

    def __call__(self, bb: Blackboard, ctx) -> NodeStatus:
        self.invocations += 1
        return recovery_step(self.world, "backup")


class NavLeaves:
    """The instances behind one registry, exposed for test introspection."""

    def __init__(self, world: GridWorld, *, wait_ticks: int = DEFAULT_WAIT_TICKS,
                 block_ticks: int = DEFAULT_BLOCK_TICKS):
        self.world = world
        self.compute_path = ComputePathToPose(world)
        self.follow_path = FollowPath(world, block_ticks=block_ticks)
        self.goal_reached = GoalReached(world)
        self.path_blocked = PathBlocked(world)
        self.clear = ClearObstacles(world)
        self.wait = WaitRecovery(world, ticks=wait_ticks)
        self.backup = Backup(world)


def make_nav_registry(world: GridWorld, **kwargs) -> tuple:
    """Build (registry, leaves) for a world. Leaf ids match the names used
    in the demo tree files."""
    leaves = NavLeaves(world, **kwargs)
    registry = LeafRegistry()
    registry.register("ComputePathToPose", leaves.compute_path,
                      input_ports=("goal",))
    registry.register("FollowPath", leaves.follow_path,
                      on_halt=leaves.follow_path.reset, input_ports=("path",))
    registry.register("GoalReached", leaves.goal_reached, input_ports=("goal",))
    registry.register("PathBlocked", leaves.path_blocked)
    registry.register("ClearObstacles", leaves.clear)
    registry.register("Wait", leaves.wait, on_halt=leaves.wait.reset)
    registry.register("Backup", leaves.backup)
    return registry, leaves

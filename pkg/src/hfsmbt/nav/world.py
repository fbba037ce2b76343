"""Deterministic 2D gridworld used by the navigation leaves.

Cells are 4-connected; the robot advances one cell per tick. Identical seeds
and obstacle schedules reproduce identical tick-by-tick traces, which is what
makes the end-to-end demo runs assertable.

Grid coordinates: cell (col, row) maps to pose (col * cell_size,
row * cell_size); row 0 is the first line of the map file. Headings are
radians from atan2 over grid deltas, so East is 0 and North (row-up) is
-pi/2.
"""

from __future__ import annotations

import json
import math
import random
from collections import deque
from dataclasses import dataclass

from ..btree.blackboard import Pose
from ..btree.status import NodeStatus


class PlanningError(Exception):
    pass


class GoalUnreachable(PlanningError):
    def __init__(self, goal_cell):
        super().__init__(f"no path to cell {goal_cell}")
        self.goal_cell = goal_cell


class GoalInObstacle(PlanningError):
    def __init__(self, goal_cell):
        super().__init__(f"goal cell {goal_cell} is inside an obstacle")
        self.goal_cell = goal_cell


# neighbor order fixes the planner tie-break: North, East, South, West
DIRECTIONS = ((0, -1), (1, 0), (0, 1), (-1, 0))

DEFAULT_WAIT_TICKS = 3


class GridWorld:
    """Occupancy grid plus the single robot pose.

    Static obstacles come from the map file; dynamic ones are toggled mid-run
    by a schedule or a recovery action. All mutation goes through methods so
    the robot-never-inside-an-obstacle invariant holds.
    """

    def __init__(self, width: int, height: int, *, cell_size: float = 1.0,
                 static_obstacles=(), seed: int = 0):
        self.width = width
        self.height = height
        self.cell_size = cell_size
        self.static_obstacles = set(static_obstacles)
        self.dynamic_obstacles: set = set()
        self.robot_pose = Pose(0.0, 0.0, 0.0)
        self.seed = seed
        self.rng = random.Random(seed)

    # -- geometry ------------------------------------------------------

    def cell_of(self, pose: Pose) -> tuple:
        return (round(pose.x / self.cell_size), round(pose.y / self.cell_size))

    def pose_of(self, cell, heading: float = 0.0) -> Pose:
        return Pose(cell[0] * self.cell_size, cell[1] * self.cell_size, heading)

    @property
    def robot_cell(self) -> tuple:
        return self.cell_of(self.robot_pose)

    def in_bounds(self, cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def occupied(self, cell) -> bool:
        return cell in self.static_obstacles or cell in self.dynamic_obstacles

    # -- mutation ------------------------------------------------------

    def set_robot_cell(self, cell, heading: float = 0.0) -> None:
        if not self.in_bounds(cell):
            raise ValueError(f"robot cell {cell} out of bounds")
        if self.occupied(cell):
            raise ValueError(f"robot cell {cell} is occupied")
        self.robot_pose = self.pose_of(cell, heading)

    def add_dynamic_obstacle(self, cell) -> bool:
        """Place a dynamic obstacle; refused on the robot's own cell."""
        cell = tuple(cell)
        if not self.in_bounds(cell) or cell == self.robot_cell:
            return False
        self.dynamic_obstacles.add(cell)
        return True

    def remove_dynamic_obstacle(self, cell) -> bool:
        cell = tuple(cell)
        if cell in self.dynamic_obstacles:
            self.dynamic_obstacles.remove(cell)
            return True
        return False

    # -- text format -----------------------------------------------------

    @classmethod
    def from_text(cls, text: str, *, cell_size: float = 1.0, seed: int = 0) -> "GridWorld":
        rows = [line.rstrip("\n") for line in text.splitlines() if line.strip()]
        if not rows:
            raise ValueError("empty world map")
        width = max(len(r) for r in rows)
        static = set()
        start = None
        for row_idx, row in enumerate(rows):
            for col_idx, ch in enumerate(row):
                if ch == "#":
                    static.add((col_idx, row_idx))
                elif ch == "S":
                    if start is not None:
                        raise ValueError("world map has more than one start cell")
                    start = (col_idx, row_idx)
                elif ch != ".":
                    raise ValueError(f"unknown map character {ch!r}")
        world = cls(width, len(rows), cell_size=cell_size,
                    static_obstacles=static, seed=seed)
        if start is None:
            start = next((c, r) for r in range(world.height)
                         for c in range(world.width) if (c, r) not in static)
        world.set_robot_cell(start)
        return world

    @classmethod
    def from_file(cls, path: str, *, cell_size: float = 1.0, seed: int = 0) -> "GridWorld":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), cell_size=cell_size, seed=seed)

    def to_text(self) -> str:
        robot = self.robot_cell
        lines = []
        for row in range(self.height):
            chars = []
            for col in range(self.width):
                if (col, row) == robot:
                    chars.append("S")
                elif (col, row) in self.static_obstacles:
                    chars.append("#")
                else:
                    chars.append(".")
            lines.append("".join(chars))
        return "\n".join(lines) + "\n"


def random_world(seed: int, width: int, height: int,
                 obstacle_density: float = 0.2) -> GridWorld:
    """Seeded world with random static obstacles and a free start cell."""
    rng = random.Random(seed)
    cells = [(c, r) for r in range(height) for c in range(width)]
    obstacles = {cell for cell in cells if rng.random() < obstacle_density}
    free = [cell for cell in cells if cell not in obstacles]
    if not free:
        obstacles.discard((0, 0))
        free = [(0, 0)]
    world = GridWorld(width, height, static_obstacles=obstacles, seed=seed)
    world.set_robot_cell(rng.choice(free))
    return world


# ---------------------------------------------------------------------------
# Planning and motion
# ---------------------------------------------------------------------------

def _heading(from_cell, to_cell) -> float:
    return math.atan2(to_cell[1] - from_cell[1], to_cell[0] - from_cell[0])


def plan_path(world: GridWorld, start: Pose, goal: Pose) -> list:
    """Shortest 4-connected obstacle-free path, breadth-first with the fixed
    N/E/S/W neighbor order as tie-break. Returns cell-center poses, start
    through goal inclusive."""
    start_cell = world.cell_of(start)
    goal_cell = world.cell_of(goal)
    for cell, label in ((start_cell, "start"), (goal_cell, "goal")):
        if not world.in_bounds(cell):
            raise ValueError(f"{label} cell {cell} out of bounds")
    if world.occupied(goal_cell):
        raise GoalInObstacle(goal_cell)
    if world.occupied(start_cell):
        raise GoalInObstacle(start_cell)

    parents = {start_cell: None}
    frontier = deque([start_cell])
    while frontier:
        cell = frontier.popleft()
        if cell == goal_cell:
            break
        for dx, dy in DIRECTIONS:
            nxt = (cell[0] + dx, cell[1] + dy)
            if nxt in parents or not world.in_bounds(nxt) or world.occupied(nxt):
                continue
            parents[nxt] = cell
            frontier.append(nxt)
    if goal_cell not in parents:
        raise GoalUnreachable(goal_cell)

    cells = []
    cell = goal_cell
    while cell is not None:
        cells.append(cell)
        cell = parents[cell]
    cells.reverse()

    path = [world.pose_of(cells[0], start.heading)]
    for prev, cur in zip(cells, cells[1:]):
        path.append(world.pose_of(cur, _heading(prev, cur)))
    return path


class FollowResult:
    ADVANCED = "advanced"
    BLOCKED = "blocked"
    ARRIVED = "arrived"


def follow_path_step(world: GridWorld, path: list, cursor: int) -> str:
    """Move the robot one cell toward path[cursor + 1].

    Returns BLOCKED (robot stays put) when the next cell is occupied,
    ARRIVED once the robot stands on the final cell, ADVANCED otherwise.
    """
    if cursor < 0 or cursor >= len(path):
        raise ValueError(f"cursor {cursor} outside path of {len(path)} poses")
    if cursor == len(path) - 1:
        return FollowResult.ARRIVED
    next_cell = world.cell_of(path[cursor + 1])
    if world.occupied(next_cell):
        return FollowResult.BLOCKED
    here = world.robot_cell
    world.robot_pose = world.pose_of(next_cell, _heading(here, next_cell))
    if cursor + 1 == len(path) - 1:
        return FollowResult.ARRIVED
    return FollowResult.ADVANCED


# ---------------------------------------------------------------------------
# Recovery actions
# ---------------------------------------------------------------------------

@dataclass
class WaitTimer:
    """Tick budget for the wait recovery; leaves own one and reset it."""

    ticks: int = DEFAULT_WAIT_TICKS
    remaining: int = -1

    def step(self) -> bool:
        """Consume one tick; True once the budget is spent."""
        if self.remaining < 0:
            self.remaining = self.ticks
        self.remaining -= 1
        if self.remaining <= 0:
            self.remaining = -1
            return True
        return False


def recovery_step(world: GridWorld, kind: str, timer: WaitTimer | None = None) -> NodeStatus:
    """One tick of a recovery action.

    clear  — remove dynamic obstacles within one cell of the robot
             (8-neighborhood); Success only if something was removed.
    wait   — consume the timer's budget, then Success.
    backup — move one cell opposite the robot's heading; Failure when that
             cell is missing, occupied, or out of bounds.
    """
    if kind == "clear":
        robot = world.robot_cell
        nearby = [cell for cell in set(world.dynamic_obstacles)
                  if abs(cell[0] - robot[0]) <= 1 and abs(cell[1] - robot[1]) <= 1]
        for cell in nearby:
            world.remove_dynamic_obstacle(cell)
        return NodeStatus.SUCCESS if nearby else NodeStatus.FAILURE

    if kind == "wait":
        if timer is None:
            raise ValueError("wait recovery needs a WaitTimer")
        return NodeStatus.SUCCESS if timer.step() else NodeStatus.RUNNING

    if kind == "backup":
        robot = world.robot_cell
        dx = -round(math.cos(world.robot_pose.heading))
        dy = -round(math.sin(world.robot_pose.heading))
        target = (robot[0] + dx, robot[1] + dy)
        if not world.in_bounds(target) or world.occupied(target):
            return NodeStatus.FAILURE
        world.robot_pose = world.pose_of(target, world.robot_pose.heading)
        return NodeStatus.SUCCESS

    raise ValueError(f"unknown recovery kind {kind!r}")


# ---------------------------------------------------------------------------
# Dynamic obstacle schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObstacleEvent:
    at_tick: int
    action: str  # "add" | "remove"
    cell: tuple


class ObstacleSchedule:
    """Scripted obstacle toggles, applied between ticks by the tree server."""

    def __init__(self, events=()):
        self.events = sorted(events, key=lambda e: e.at_tick)

    @classmethod
    def from_json(cls, text: str) -> "ObstacleSchedule":
        data = json.loads(text)
        if isinstance(data, dict):
            data = data.get("events", [])
        events = []
        for entry in data:
            action = entry["action"]
            if action not in ("add", "remove"):
                raise ValueError(f"unknown schedule action {action!r}")
            events.append(ObstacleEvent(int(entry["at_tick"]), action,
                                        tuple(entry["cell"])))
        return cls(events)

    @classmethod
    def from_file(cls, path: str) -> "ObstacleSchedule":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def apply(self, world: GridWorld, tick: int) -> None:
        for event in self.events:
            if event.at_tick == tick:
                if event.action == "add":
                    world.add_dynamic_obstacle(event.cell)
                else:
                    world.remove_dynamic_obstacle(event.cell)

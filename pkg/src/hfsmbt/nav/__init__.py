"""Gridworld navigation simulator and its behavior-tree leaves."""

from .leaves import (
    DEFAULT_BLOCK_TICKS,
    Backup,
    ClearObstacles,
    ComputePathToPose,
    FollowPath,
    GoalReached,
    NavLeaves,
    PathBlocked,
    WaitRecovery,
    make_nav_registry,
)
from .world import (
    DEFAULT_WAIT_TICKS,
    DIRECTIONS,
    FollowResult,
    GoalInObstacle,
    GoalUnreachable,
    GridWorld,
    ObstacleEvent,
    ObstacleSchedule,
    PlanningError,
    WaitTimer,
    follow_path_step,
    plan_path,
    random_world,
    recovery_step,
)

__all__ = [
    "Backup",
    "ClearObstacles",
    "ComputePathToPose",
    "DEFAULT_BLOCK_TICKS",
    "DEFAULT_WAIT_TICKS",
    "DIRECTIONS",
    "FollowPath",
    "FollowResult",
    "GoalInObstacle",
    "GoalReached",
    "GoalUnreachable",
    "GridWorld",
    "NavLeaves",
    "ObstacleEvent",
    "ObstacleSchedule",
    "PathBlocked",
    "PlanningError",
    "WaitRecovery",
    "WaitTimer",
    "follow_path_step",
    "make_nav_registry",
    "plan_path",
    "random_world",
    "recovery_step",
]

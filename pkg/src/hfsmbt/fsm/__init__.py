"""Hierarchical state machines, autonomy gating, and the cycle executive."""

from .autonomy import AutonomyLevel, GateResult, gate_transition
from .commands import (
    CommandError,
    ConfirmTransition,
    EndGoals,
    ForceTransition,
    InjectGoal,
    Preempt,
    SetAutonomy,
    from_script_line,
    from_wire,
)
from .executive import (
    DEFAULT_PERIOD_MS,
    Executive,
    ExecutiveStall,
    GoalFeed,
    GoalQueueState,
)
from .machine import (
    RESERVED_OUTCOME,
    MachineStructureError,
    RunControl,
    State,
    StateMachine,
    StateSpec,
)
from .userdata import RemappedUserData, UserData, UserDataKeyMissing

__all__ = [
    "AutonomyLevel",
    "CommandError",
    "ConfirmTransition",
    "DEFAULT_PERIOD_MS",
    "EndGoals",
    "Executive",
    "ExecutiveStall",
    "ForceTransition",
    "GateResult",
    "GoalFeed",
    "GoalQueueState",
    "InjectGoal",
    "MachineStructureError",
    "Preempt",
    "RESERVED_OUTCOME",
    "RemappedUserData",
    "RunControl",
    "SetAutonomy",
    "State",
    "StateMachine",
    "StateSpec",
    "UserData",
    "UserDataKeyMissing",
    "from_script_line",
    "from_wire",
]

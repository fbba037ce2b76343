"""Operator commands accepted by the executive.

Commands arrive from the websocket mirror, from scripted timelines, or from
tests calling submit() directly. Each one is acknowledged on the event
stream with a command_ack carrying applied=True/False.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..btree.blackboard import Pose
from .autonomy import AutonomyLevel


class CommandError(ValueError):
    pass


@dataclass(frozen=True)
class SetAutonomy:
    level: AutonomyLevel
    kind = "set_autonomy"


@dataclass(frozen=True)
class ConfirmTransition:
    state: str | None = None
    kind = "confirm_transition"


@dataclass(frozen=True)
class ForceTransition:
    outcome: str
    state: str | None = None
    kind = "force_transition"


@dataclass(frozen=True)
class Preempt:
    kind = "preempt"


@dataclass(frozen=True)
class InjectGoal:
    pose: Pose
    kind = "goal"


@dataclass(frozen=True)
class EndGoals:
    kind = "end_goals"


def from_wire(payload: dict):
    """Decode one inbound console message into a command."""
    kind = payload.get("type")
    if kind == "set_autonomy":
        return SetAutonomy(AutonomyLevel.parse(payload["level"]))
    if kind == "confirm_transition":
        return ConfirmTransition(payload.get("state"))
    if kind == "force_transition":
        outcome = payload.get("outcome")
        if not outcome:
            raise CommandError("force_transition needs an outcome")
        return ForceTransition(outcome, payload.get("state"))
    if kind == "preempt":
        return Preempt()
    if kind == "goal":
        return InjectGoal(Pose.from_wire(payload["pose"]))
    if kind == "end_goals":
        return EndGoals()
    raise CommandError(f"unknown command type {payload.get('type')!r}")


def from_script_line(line: str):
    """Decode the command part of a script line (everything after the
    timestamp). Returns None for blank and comment lines."""
    line = line.strip()
    if not line or line.startswith("#"):
        return None
    parts = line.split()
    name, args = parts[0], parts[1:]
    if name == "set_autonomy":
        if len(args) != 1:
            raise CommandError("set_autonomy takes one level")
        return SetAutonomy(AutonomyLevel.parse(args[0]))
    if name == "confirm_transition":
        return ConfirmTransition(args[0] if args else None)
    if name == "force_transition":
        if not args:
            raise CommandError("force_transition takes an outcome and optional state")
        return ForceTransition(args[0], args[1] if len(args) > 1 else None)
    if name == "preempt":
        return Preempt()
    if name == "goal":
        if len(args) not in (2, 3):
            raise CommandError("goal takes x y [heading]")
        heading = float(args[2]) if len(args) == 3 else 0.0
        return InjectGoal(Pose(float(args[0]), float(args[1]), heading))
    if name == "end_goals":
        return EndGoals()
    raise CommandError(f"unknown script command {name!r}")

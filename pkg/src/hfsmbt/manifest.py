"""TOML manifests describing a runnable behavior.

A manifest names the machine (outcomes, initial state, success outcome),
lists its states with transitions and optional autonomy gates, and points at
the world map and tree files, all relative to the manifest's directory. The
CLI builds a complete run (world, tree server, machine, executive) from one
manifest plus flags.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .btree.blackboard import Pose
from .bridge import BtExecuteGoalState, BtExecuteState, BtLoaderState, BtSession
from .fsm.autonomy import AutonomyLevel
from .fsm.executive import GoalFeed, GoalQueueState
from .fsm.machine import MachineStructureError, StateMachine
from .nav.world import GridWorld, ObstacleSchedule

STATE_TYPES = ("bt_loader", "bt_execute", "bt_execute_goal", "goal_source")


class ManifestError(Exception):
    def __init__(self, problems):
        problems = list(problems)
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class WorldSpec:
    map_path: str
    schedule_path: str | None = None
    cell_size: float = 1.0
    seed: int = 0
    tick_ms: int = 100


@dataclass
class StateEntry:
    name: str
    type: str
    transitions: dict
    autonomy: dict = field(default_factory=dict)
    remaps: dict = field(default_factory=dict)
    tree_file: str | None = None
    tree_id: str = ""
    goals: list = field(default_factory=list)
    close_feed: bool = False


@dataclass
class Manifest:
    name: str
    outcomes: list
    initial: str
    success_outcome: str
    period_ms: int
    autonomy: str
    states: list
    world: WorldSpec | None
    source_path: str = ""


def _problem_str(context: str, message: str) -> str:
    return f"{context}: {message}" if context else message


def load_manifest(path: str) -> Manifest:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as err:
        raise ManifestError([f"cannot read {path}: {err}"]) from None
    except tomllib.TOMLDecodeError as err:
        raise ManifestError([f"bad TOML in {path}: {err}"]) from None

    base = os.path.dirname(os.path.abspath(path))
    problems = []

    def require(table, key, context, kind=None):
        if key not in table:
            problems.append(_problem_str(context, f"missing {key!r}"))
            return None
        value = table[key]
        if kind is not None and not isinstance(value, kind):
            problems.append(_problem_str(
                context, f"{key!r} must be {kind.__name__}"))
            return None
        return value

    name = require(data, "name", "", str)
    outcomes = require(data, "outcomes", "", list)
    initial = require(data, "initial", "", str)
    period_ms = data.get("period_ms", 100)
    autonomy = data.get("autonomy", "full")
    try:
        AutonomyLevel.parse(autonomy)
    except (ValueError, TypeError):
        problems.append(f"unknown autonomy level {autonomy!r}")

    success = data.get("success_outcome")
    if outcomes:
        if success is None:
            success = outcomes[0]
        elif success not in outcomes:
            problems.append(f"success_outcome {success!r} not in outcomes")

    world = None
    if "world" in data:
        wtable = data["world"]
        map_path = require(wtable, "map", "[world]", str)
        if map_path is not None:
            map_path = os.path.join(base, map_path)
            if not os.path.exists(map_path):
                problems.append(f"[world]: map file {map_path} not found")
        schedule_path = wtable.get("schedule")
        if schedule_path is not None:
            schedule_path = os.path.join(base, schedule_path)
            if not os.path.exists(schedule_path):
                problems.append(f"[world]: schedule file {schedule_path} not found")
        world = WorldSpec(map_path=map_path or "",
                          schedule_path=schedule_path,
                          cell_size=float(wtable.get("cell_size", 1.0)),
                          seed=int(wtable.get("seed", 0)),
                          tick_ms=int(wtable.get("tick_ms", 100)))

    states = []
    seen = set()
    for idx, table in enumerate(data.get("state", [])):
        context = f"[[state]] #{idx + 1}"
        sname = require(table, "name", context, str)
        stype = require(table, "type", context, str)
        transitions = require(table, "transitions", context, dict)
        if sname is not None:
            context = f"state {sname!r}"
            if sname in seen:
                problems.append(f"duplicate state name {sname!r}")
            seen.add(sname)
        if stype is not None and stype not in STATE_TYPES:
            problems.append(_problem_str(
                context, f"unknown type {stype!r} (one of {', '.join(STATE_TYPES)})"))
        entry = StateEntry(name=sname or f"state{idx}", type=stype or "",
                           transitions=dict(transitions or {}),
                           autonomy=dict(table.get("autonomy", {})),
                           remaps=dict(table.get("remaps", {})))
        for outcome, level in entry.autonomy.items():
            try:
                AutonomyLevel.parse(level)
            except (ValueError, TypeError):
                problems.append(_problem_str(
                    context, f"bad autonomy level {level!r} for {outcome!r}"))
        if stype == "bt_loader":
            tree_file = require(table, "tree_file", context, str)
            if tree_file is not None:
                entry.tree_file = os.path.join(base, tree_file)
                if not os.path.exists(entry.tree_file):
                    problems.append(_problem_str(
                        context, f"tree file {entry.tree_file} not found"))
        elif stype in ("bt_execute", "bt_execute_goal"):
            entry.tree_id = str(table.get("tree_id", ""))
        elif stype == "goal_source":
            entry.close_feed = bool(table.get("close", False))
            for g in table.get("goals", []):
                if not isinstance(g, list) or len(g) not in (2, 3):
                    problems.append(_problem_str(
                        context, f"goal {g!r} must be [x, y] or [x, y, heading]"))
                    continue
                heading = float(g[2]) if len(g) == 3 else 0.0
                entry.goals.append(Pose(float(g[0]), float(g[1]), heading))
        states.append(entry)

    if not states:
        problems.append("no [[state]] entries")
    if initial is not None and states and initial not in seen:
        problems.append(f"initial state {initial!r} not defined")

    if problems:
        raise ManifestError(problems)

    return Manifest(name=name, outcomes=list(outcomes), initial=initial,
                    success_outcome=success, period_ms=int(period_ms),
                    autonomy=str(autonomy), states=states, world=world,
                    source_path=os.path.abspath(path))


def build_world(manifest: Manifest):
    """(world, schedule, tick_ms) from the manifest's [world] table."""
    if manifest.world is None:
        return None, ObstacleSchedule(), 100
    spec = manifest.world
    world = GridWorld.from_file(spec.map_path, cell_size=spec.cell_size,
                                seed=spec.seed)
    schedule = (ObstacleSchedule.from_file(spec.schedule_path)
                if spec.schedule_path else ObstacleSchedule())
    return world, schedule, spec.tick_ms


def build_machine(manifest: Manifest, session: BtSession, *,
                  bus=None) -> tuple:
    """(machine, goal_feed) wired from manifest state entries.

    Raises ManifestError when the assembled machine fails validation, so a
    bad manifest is caught before anything runs.
    """
    machine = StateMachine(manifest.name, tuple(manifest.outcomes),
                           manifest.initial)
    feed = GoalFeed()
    for entry in manifest.states:
        if entry.type == "bt_loader":
            impl = BtLoaderState(session, path=entry.tree_file)
        elif entry.type == "bt_execute":
            impl = BtExecuteState(session, tree_id=entry.tree_id, bus=bus)
        elif entry.type == "bt_execute_goal":
            impl = BtExecuteGoalState(session, tree_id=entry.tree_id, bus=bus)
        elif entry.type == "goal_source":
            for pose in entry.goals:
                feed.push(pose)
            if entry.close_feed:
                feed.close()
            impl = GoalQueueState(feed)
        else:
            raise ManifestError([f"state {entry.name!r}: unknown type "
                                 f"{entry.type!r}"])
        machine.add_state(entry.name, impl, entry.transitions,
                          autonomy=entry.autonomy, remaps=entry.remaps)
    try:
        machine.validate()
    except MachineStructureError as err:
        raise ManifestError(err.problems) from None
    return machine, feed

"""Hierarchical state machine with operator-gated transitions.

States are step-driven: the executive calls execute_step once per cycle and
a state answers with None (still busy) or an outcome label. Every declared
outcome must have a transition (checked by validate), so the machine can
never fall off an unlabeled edge.

A transition may require an autonomy level. When the current level is too
low the machine publishes transition_blocked and holds the state: nothing
advances until the operator confirms, forces, or raises autonomy. Machines
nest by using a StateMachine as a state implementation; each level gates its
own transitions, so an outcome bubbles outward only through gates it passed.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from ..events import EventBus
from .autonomy import AutonomyLevel, GateResult, gate_transition
from .userdata import RemappedUserData

RESERVED_OUTCOME = "preempted"


class MachineStructureError(Exception):
    def __init__(self, problems):
        problems = list(problems)
        super().__init__("; ".join(problems))
        self.problems = problems


class State:
    """Base state. Subclasses declare `outcomes` and override the hooks
    they need. on_preempt replaces on_exit when the state is torn down
    early, so cleanup must live in whichever hook applies."""

    outcomes: tuple = ()
    input_keys: tuple = ()
    output_keys: tuple = ()

    def on_enter(self, ud) -> None:
        pass

    def execute_step(self, ud):
        raise NotImplementedError

    def on_exit(self, ud) -> None:
        pass

    def on_preempt(self, ud) -> None:
        pass


class RunControl:
    """Shared knobs between the executive, the mirror, and the machine:
    current autonomy plus one-shot confirm/force tokens keyed by full state
    path. Thread-safe because the websocket side writes concurrently."""

    def __init__(self, bus: EventBus | None = None,
                 autonomy: AutonomyLevel = AutonomyLevel.FULL):
        self.bus = bus or EventBus()
        self._lock = threading.Lock()
        self._autonomy = AutonomyLevel.parse(autonomy)
        self._confirms: list = []  # state paths
        self._forces: list = []    # (state path, outcome)
        self.preempt_requested = False

    @property
    def autonomy(self) -> AutonomyLevel:
        with self._lock:
            return self._autonomy

    @autonomy.setter
    def autonomy(self, level) -> None:
        with self._lock:
            self._autonomy = AutonomyLevel.parse(level)

    def add_confirm(self, path: str) -> None:
        with self._lock:
            self._confirms.append(path)

    def add_force(self, path: str, outcome: str) -> None:
        with self._lock:
            self._forces.append((path, outcome))

    def take_confirm(self, path: str) -> bool:
        with self._lock:
            if path in self._confirms:
                self._confirms.remove(path)
                return True
            return False

    def take_force(self, path: str):
        with self._lock:
            for entry in self._forces:
                if entry[0] == path:
                    self._forces.remove(entry)
                    return entry[1]
            return None

    def publish(self, kind: str, **data) -> None:
        self.bus.publish(kind, data)


@dataclass
class StateSpec:
    impl: State
    transitions: dict
    autonomy: dict = field(default_factory=dict)
    remaps: dict = field(default_factory=dict)


class StateMachine(State):
    def __init__(self, name: str, outcomes, initial: str):
        self.name = name
        self.machine_outcomes = tuple(outcomes)
        self.initial = initial
        self._states: dict = {}
        self._order: list = []
        self._control: RunControl | None = None
        self._path = name
        self._current: str | None = None
        self._pending: str | None = None

    @property
    def outcomes(self) -> tuple:
        return self.machine_outcomes

    def add_state(self, name: str, impl: State, transitions: dict,
                  autonomy: dict | None = None,
                  remaps: dict | None = None) -> None:
        if name in self._states:
            raise MachineStructureError([f"duplicate state {name!r}"])
        gates = {o: AutonomyLevel.parse(l) for o, l in (autonomy or {}).items()}
        self._states[name] = StateSpec(impl=impl, transitions=dict(transitions),
                                       autonomy=gates, remaps=dict(remaps or {}))
        self._order.append(name)

    # -- structure ---------------------------------------------------------

    def validate(self) -> None:
        problems = []
        if RESERVED_OUTCOME in self.machine_outcomes:
            problems.append(f"machine {self.name!r} declares reserved outcome "
                            f"{RESERVED_OUTCOME!r}")
        if self.initial not in self._states:
            problems.append(f"machine {self.name!r}: initial state "
                            f"{self.initial!r} not defined")
        outcome_set = set(self.machine_outcomes)
        for name in self._order:
            spec = self._states[name]
            declared = set(spec.impl.outcomes)
            if RESERVED_OUTCOME in declared:
                problems.append(f"state {name!r} declares reserved outcome "
                                f"{RESERVED_OUTCOME!r}")
            for outcome in sorted(declared):
                if outcome not in spec.transitions:
                    problems.append(f"state {name!r}: outcome {outcome!r} has "
                                    "no transition")
            for outcome in spec.transitions:
                if outcome not in declared:
                    problems.append(f"state {name!r}: transition for unknown "
                                    f"outcome {outcome!r}")
            for outcome in spec.autonomy:
                if outcome not in declared:
                    problems.append(f"state {name!r}: autonomy gate for "
                                    f"unknown outcome {outcome!r}")
            for outcome, target in spec.transitions.items():
                in_states = target in self._states
                in_outcomes = target in outcome_set
                if in_states and in_outcomes:
                    problems.append(f"state {name!r}: target {target!r} is both "
                                    "a state and a machine outcome")
                elif not in_states and not in_outcomes:
                    problems.append(f"state {name!r}: target {target!r} is "
                                    "neither a state nor a machine outcome")
            if isinstance(spec.impl, StateMachine):
                try:
                    spec.impl.validate()
                except MachineStructureError as err:
                    problems.extend(err.problems)
        if problems:
            raise MachineStructureError(problems)

    def bind(self, control: RunControl, path: str | None = None) -> None:
        self._control = control
        self._path = path if path is not None else self.name
        for name in self._order:
            impl = self._states[name].impl
            if isinstance(impl, StateMachine):
                impl.bind(control, f"{self._path}/{name}")

    def describe(self) -> dict:
        states = {}
        for name in self._order:
            spec = self._states[name]
            entry = {
                "outcomes": list(spec.impl.outcomes),
                "transitions": dict(spec.transitions),
                "autonomy": {o: int(l) for o, l in spec.autonomy.items()},
            }
            if spec.remaps:
                entry["remaps"] = dict(spec.remaps)
            if isinstance(spec.impl, StateMachine):
                entry["machine"] = spec.impl.describe()
            states[name] = entry
        return {"name": self.name, "initial": self.initial,
                "outcomes": list(self.machine_outcomes), "states": states}

    # -- runtime -------------------------------------------------------

    def _child_path(self, name: str) -> str:
        return f"{self._path}/{name}"

    def _child_ud(self, spec: StateSpec, ud):
        return RemappedUserData(ud, spec.remaps) if spec.remaps else ud

    def active_path(self) -> list:
        """Full paths of the active chain, outermost first."""
        if self._current is None:
            return []
        chain = [self._child_path(self._current)]
        impl = self._states[self._current].impl
        if isinstance(impl, StateMachine):
            chain.extend(impl.active_path())
        return chain

    def find_pending(self):
        """Innermost blocked transition as (path, outcome, required_level),
        or None."""
        if self._current is None:
            return None
        impl = self._states[self._current].impl
        if isinstance(impl, StateMachine):
            inner = impl.find_pending()
            if inner is not None:
                return inner
        if self._pending is not None:
            spec = self._states[self._current]
            required = spec.autonomy.get(self._pending, AutonomyLevel.OFF)
            return (self._child_path(self._current), self._pending, required)
        return None

    def find_spec(self, path: str):
        """StateSpec for a full state path anywhere in this machine."""
        for name in self._order:
            spec = self._states[name]
            if self._child_path(name) == path:
                return spec
            if isinstance(spec.impl, StateMachine):
                found = spec.impl.find_spec(path)
                if found is not None:
                    return found
        return None

    def on_enter(self, ud) -> None:
        if self._control is None:
            raise MachineStructureError(
                [f"machine {self.name!r} stepped before bind()"])
        self._pending = None
        self._enter(self.initial, ud)

    def _enter(self, name: str, ud) -> None:
        self._current = name
        self._control.publish("state_entered", state=name,
                              path=self._child_path(name))
        spec = self._states[name]
        spec.impl.on_enter(self._child_ud(spec, ud))

    def execute_step(self, ud):
        if self._current is None:
            raise MachineStructureError(
                [f"machine {self.name!r} stepped while inactive"])
        name = self._current
        spec = self._states[name]
        child_ud = self._child_ud(spec, ud)

        forced = self._control.take_force(self._child_path(name))
        if forced is not None:
            if forced not in spec.transitions:
                raise MachineStructureError(
                    [f"forced outcome {forced!r} not declared for state {name!r}"])
            if self._pending is None:
                spec.impl.on_preempt(child_ud)
            self._pending = None
            return self._take(name, spec, forced, ud, forced_flag=True,
                              skip_exit=True)

        if self._pending is not None:
            outcome = self._pending
            required = spec.autonomy.get(outcome, AutonomyLevel.OFF)
            confirmed = self._control.take_confirm(self._child_path(name))
            gate = gate_transition(required, self._control.autonomy,
                                   confirmed=confirmed)
            if gate is GateResult.BLOCKED:
                return None
            self._pending = None
            return self._take(name, spec, outcome, ud, confirmed_flag=confirmed)

        outcome = spec.impl.execute_step(child_ud)
        if outcome is None:
            return None
        if outcome not in spec.transitions:
            raise MachineStructureError(
                [f"state {name!r} emitted undeclared outcome {outcome!r}"])
        required = spec.autonomy.get(outcome, AutonomyLevel.OFF)
        if gate_transition(required, self._control.autonomy) is GateResult.BLOCKED:
            self._pending = outcome
            self._control.publish("transition_blocked", state=name,
                                  path=self._child_path(name), outcome=outcome,
                                  required_level=int(required),
                                  outcomes=sorted(spec.transitions))
            return None
        return self._take(name, spec, outcome, ud)

    def _take(self, name: str, spec: StateSpec, outcome: str, ud,
              forced_flag: bool = False, confirmed_flag: bool = False,
              skip_exit: bool = False):
        child_ud = self._child_ud(spec, ud)
        if not skip_exit:
            spec.impl.on_exit(child_ud)
        data = {"state": name, "path": self._child_path(name),
                "outcome": outcome, "forced": forced_flag}
        if confirmed_flag:
            data["confirmed"] = True
        self._control.publish("outcome_emitted", **data)
        self._control.publish("state_exited", state=name,
                              path=self._child_path(name))
        target = spec.transitions[outcome]
        if target in self.machine_outcomes:
            self._current = None
            return target
        self._enter(target, ud)
        return None

    def on_preempt(self, ud) -> None:
        if self._current is None:
            return
        name = self._current
        spec = self._states[name]
        spec.impl.on_preempt(self._child_ud(spec, ud))
        self._control.publish("state_exited", state=name,
                              path=self._child_path(name))
        self._current = None
        self._pending = None

"""Autonomy levels and the transition gate.

A transition carries a required level; it fires on its own only when the
current level is at least that high. Below it, the transition blocks and
holds its state until an operator confirms it, forces it, or raises the
level. The gate itself is a pure function so the blocking rule can be
property-tested in isolation.
"""

from __future__ import annotations

import enum


class AutonomyLevel(enum.IntEnum):
    OFF = 0
    LOW = 1
    HIGH = 2
    FULL = 3

    @classmethod
    def parse(cls, value) -> "AutonomyLevel":
        if isinstance(value, cls):
            return value
        if isinstance(value, int):
            return cls(value)
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown autonomy level {value!r}") from None
        raise TypeError(f"cannot parse autonomy level from {type(value).__name__}")


class GateResult(enum.Enum):
    ALLOWED = "allowed"
    BLOCKED = "blocked"


def gate_transition(required: AutonomyLevel, current: AutonomyLevel, *,
                    confirmed: bool = False, forced: bool = False) -> GateResult:
    """Allowed when the operator forced or confirmed it, or when the current
    autonomy level meets the requirement."""
    if forced or confirmed:
        return GateResult.ALLOWED
    if int(current) >= int(required):
        return GateResult.ALLOWED
    return GateResult.BLOCKED

"""Flatten memoryless trees into ordered guard/action decision lists.

A reactive tree restarted from the root every tick is equivalent to a
priority-ordered list of if/elif rules over its condition leaves: the first
rule whose guard holds names the single action the tick would hand control
to, or resolves the tick outright. Actions are modeled as long-running
(reaching one ends the tick), which is what makes the selected leaf a pure
function of the condition valuation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    ActionNode,
    BtError,
    BtNode,
    ConditionNode,
    ReactiveFallbackNode,
    ReactiveSequenceNode,
)

SUCCEED = "succeed"
FAIL = "fail"


class NotNormalizable(BtError):
    def __init__(self, kind: str):
        super().__init__(f"{kind} nodes have tick-to-tick memory and cannot "
                         f"be flattened to a decision list")
        self.kind = kind


@dataclass(frozen=True)
class Guard:
    """Conjunction of condition literals: (condition id, required value)."""

    literals: tuple

    def satisfied(self, valuation: dict) -> bool:
        return all(valuation[cid] is want for cid, want in self.literals)

    def conditions(self):
        return [cid for cid, _ in self.literals]

    def __str__(self):
        if not self.literals:
            return "true"
        return " and ".join(
            cid if want else f"not {cid}" for cid, want in self.literals
        )


@dataclass(frozen=True)
class DecisionRule:
    guard: Guard
    action: str  # leaf id, or the sentinels "succeed" / "fail"

    def __str__(self):
        return f"({self.guard} -> {self.action})"


def _extend(literals: tuple, cid: str, want: bool):
    """Add a literal; None signals a contradiction (unreachable path)."""
    for existing_cid, existing_want in literals:
        if existing_cid == cid:
            return literals if existing_want is want else None
    return literals + ((cid, want),)


def _paths(node: BtNode, literals: tuple) -> list:
    if isinstance(node, ConditionNode):
        out = []
        taken = _extend(literals, node.leaf_id, True)
        if taken is not None:
            out.append((taken, SUCCEED))
        refused = _extend(literals, node.leaf_id, False)
        if refused is not None:
            out.append((refused, FAIL))
        return out
    if isinstance(node, ActionNode):
        return [(literals, node.leaf_id)]
    if isinstance(node, ReactiveFallbackNode):
        return _chain(node.children, literals, skip_on=FAIL, exhausted=FAIL)
    if isinstance(node, ReactiveSequenceNode):
        return _chain(node.children, literals, skip_on=SUCCEED, exhausted=SUCCEED)
    raise NotNormalizable(node.kind)


def _chain(children, literals, skip_on, exhausted):
    if not children:
        return [(literals, exhausted)]
    out = []
    for sub_literals, result in _paths(children[0], literals):
        if result == skip_on:
            out.extend(_chain(children[1:], sub_literals, skip_on, exhausted))
        else:
            out.append((sub_literals, result))
    return out


def to_decision_list(tree: BtNode) -> list[DecisionRule]:
    """Enumerate the tree's execution paths in priority order.

    The resulting guards partition the condition valuations, so top-down
    evaluation fires exactly one rule per valuation.
    """
    return [DecisionRule(Guard(lits), action) for lits, action in _paths(tree, ())]


def evaluate(rules: list[DecisionRule], valuation: dict) -> str:
    """First-match evaluation against a {condition id: bool} valuation."""
    for rule in rules:
        if rule.guard.satisfied(valuation):
            return rule.action
    raise BtError("no rule matched; decision list is not exhaustive")

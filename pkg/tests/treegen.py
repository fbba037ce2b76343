"""Random tree builders shared by the unit and acceptance suites."""

import random

from hfsmbt.btree.blackboard import LeafRegistry
from hfsmbt.btree.core import (
    ActionNode,
    BtNode,
    ConditionNode,
    ReactiveFallbackNode,
    ReactiveSequenceNode,
)
from hfsmbt.btree.status import NodeStatus


def random_memoryless_tree(rng: random.Random, *, max_depth: int = 4,
                           num_conditions: int = 6,
                           num_actions: int = 4) -> BtNode:
    """Tree over ReactiveSequence/ReactiveFallback composites with condition
    and action leaves only, so every tick restarts from the root."""
    counter = {"n": 0}

    def leaf():
        if rng.random() < 0.55:
            return ConditionNode(f"c{rng.randrange(num_conditions)}")
        return ActionNode(f"a{rng.randrange(num_actions)}")

    def build(depth):
        if depth >= max_depth or rng.random() < 0.3:
            return leaf()
        counter["n"] += 1
        cls = rng.choice([ReactiveSequenceNode, ReactiveFallbackNode])
        width = rng.randint(1, 4)
        return cls([build(depth + 1) for _ in range(width)],
                   name=f"{cls.kind}_{counter['n']}")

    root = build(0)
    if not root.children:
        # a bare leaf is a degenerate tree; wrap it so the root is composite
        root = ReactiveSequenceNode([root], name="wrap")
    return root


def condition_ids(tree: BtNode):
    return sorted({n.leaf_id for n in tree.walk() if isinstance(n, ConditionNode)})


def valuation_registry(valuation: dict, invoked: list) -> LeafRegistry:
    """Conditions answer from the valuation; actions log themselves and hold
    Running so the reached leaf is observable from a single tick."""
    registry = LeafRegistry()
    ids = set(valuation)

    def make_condition(cid):
        def fn(bb, ctx):
            return NodeStatus.SUCCESS if valuation[cid] else NodeStatus.FAILURE
        return fn

    for cid in ids:
        registry.register(cid, make_condition(cid))

    def make_action(aid):
        def fn(bb, ctx):
            invoked.append(aid)
            return NodeStatus.RUNNING
        return fn

    for i in range(16):
        registry.register(f"a{i}", make_action(f"a{i}"))
    return registry


def all_valuations(ids):
    ids = list(ids)
    for mask in range(1 << len(ids)):
        yield {cid: bool(mask >> i & 1) for i, cid in enumerate(ids)}

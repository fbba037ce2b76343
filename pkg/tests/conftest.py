import threading

import pytest

from hfsmbt.btree.blackboard import Blackboard, LeafRegistry, TickContext
from hfsmbt.btree.status import NodeStatus


@pytest.fixture
def bb():
    return Blackboard()


@pytest.fixture
def ctx():
    return TickContext(cancel=threading.Event())


class ScriptedLeaves:
    """Registry builder where each leaf id maps to a fixed status or a
    sequence of statuses, with every invocation logged."""

    def __init__(self):
        self.registry = LeafRegistry()
        self.log = []
        self.halted = []

    def add(self, leaf_id, statuses, *, input_ports=()):
        if isinstance(statuses, NodeStatus):
            statuses = [statuses]
        cursor = {"i": 0}
        script = list(statuses)

        def fn(bb, ctx, _id=leaf_id, _script=script, _cursor=cursor):
            self.log.append(_id)
            idx = min(_cursor["i"], len(_script) - 1)
            _cursor["i"] += 1
            return _script[idx]

        def on_halt(_id=leaf_id, _cursor=cursor):
            self.halted.append(_id)
            _cursor["i"] = 0

        self.registry.register(leaf_id, fn, on_halt=on_halt,
                               input_ports=input_ports)
        return self

    def clear_log(self):
        del self.log[:]
        del self.halted[:]


@pytest.fixture
def scripted():
    return ScriptedLeaves()

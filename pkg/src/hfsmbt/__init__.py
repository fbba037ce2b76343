"""hfsmbt: hierarchical state machines supervising behavior-tree execution.

The package couples three layers:

* ``hfsmbt.btree``  — behavior-tree model, tick engine, and XML encoding
* ``hfsmbt.fsm``    — state-machine executive with adjustable autonomy
* ``hfsmbt.server`` — networked tree server speaking a goal/feedback/result
  protocol, plus the bridge states that let a machine supervise a tree

``hfsmbt.nav`` provides a deterministic gridworld so complete navigation
behaviors run without any robot stack attached.
"""

__version__ = "0.1.0"

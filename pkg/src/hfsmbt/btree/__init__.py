"""Behavior-tree data model, tick engine, decision lists, and XML encoding."""

from .blackboard import (
    Blackboard,
    BlackboardKeyMissing,
    LeafImpl,
    LeafRegistry,
    PortBindingError,
    Pose,
    ScopedBlackboard,
    TickContext,
)
from .core import (
    INFINITE,
    ActionNode,
    BtError,
    BtNode,
    ConditionNode,
    ConditionReturnedRunning,
    FallbackNode,
    InvalidThreshold,
    ParallelNode,
    ReactiveFallbackNode,
    ReactiveSequenceNode,
    RepeatNode,
    RetryNode,
    SequenceNode,
    SubTreeNode,
    TreeStructureError,
    UnregisteredLeaf,
    active_paths,
    backchain,
    halt,
    reduce_fallback,
    reduce_parallel,
    reduce_sequence,
    same_structure,
    tick_root,
)
from .decision import (
    FAIL,
    SUCCEED,
    DecisionRule,
    Guard,
    NotNormalizable,
    evaluate,
    to_decision_list,
)
from .status import NodeStatus, invert
from .xmlio import (
    BadAttribute,
    BadStructure,
    BadThreshold,
    BtDocument,
    BtXmlError,
    DanglingSubTree,
    MissingAttribute,
    SubTreeCycle,
    UnknownElement,
    ValidationIssue,
    XmlSyntax,
    load_bt_file,
    parse_bt_xml,
    serialize,
    validate,
)

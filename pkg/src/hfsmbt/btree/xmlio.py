"""XML encoding of behavior trees.

The grammar is a strict subset of the BehaviorTree.CPP v3 format: a <root>
element naming the main tree, one or more <BehaviorTree ID="..."> elements
each holding exactly one node element, and node elements for the composites,
decorators, leaves, and subtree references the engine supports. Unknown
elements are hard errors; silently skipping one would change semantics.

Port attribute values in braces ("{key}") are blackboard remaps; anything
else is a literal constant handed to the leaf as-is.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from xml.sax.saxutils import escape, quoteattr

from .blackboard import LeafRegistry
from .core import (
    ActionNode,
    BtNode,
    ConditionNode,
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
)


class BtXmlError(Exception):
    """Base class for every parse/validation failure in this module."""


class XmlSyntax(BtXmlError):
    def __init__(self, line: int, column: int, detail: str):
        super().__init__(f"XML syntax error at line {line}, column {column}: {detail}")
        self.line = line
        self.column = column


class UnknownElement(BtXmlError):
    def __init__(self, name: str):
        super().__init__(f"unknown element <{name}>")
        self.element = name


class MissingAttribute(BtXmlError):
    def __init__(self, element: str, attr: str):
        super().__init__(f"<{element}> is missing required attribute {attr!r}")
        self.element = element
        self.attr = attr


class BadAttribute(BtXmlError):
    def __init__(self, element: str, attr: str, value: str):
        super().__init__(f"<{element}> attribute {attr}={value!r} is not valid")
        self.element = element
        self.attr = attr


class BadThreshold(BtXmlError):
    def __init__(self, detail: str):
        super().__init__(detail)


class BadStructure(BtXmlError):
    def __init__(self, detail: str):
        super().__init__(detail)


class DanglingSubTree(BtXmlError):
    def __init__(self, tree_id: str):
        super().__init__(f"SubTree references unknown tree {tree_id!r}")
        self.tree_id = tree_id


class SubTreeCycle(BtXmlError):
    def __init__(self, path: list):
        super().__init__("SubTree reference cycle: " + " -> ".join(path))
        self.path = list(path)


@dataclass
class ValidationIssue:
    code: str
    message: str
    tree_id: str = ""
    node: str = ""

    def __str__(self):
        where = f" [{self.tree_id}/{self.node}]" if self.tree_id else ""
        return f"{self.code}: {self.message}{where}"


@dataclass
class BtDocument:
    """A parsed XML file: one or more named trees plus the main tree id."""

    main_tree_id: str
    trees: dict
    source_path: str = ""

    def instantiate(self, tree_id: str = "", external: dict | None = None) -> BtNode:
        """Fresh runtime copy of a tree with every SubTree reference linked.

        external maps tree ids from previously loaded documents; lookups fall
        back to it when this document does not define the id.
        """
        target = tree_id or self.main_tree_id
        table = dict(external or {})
        table.update(self.trees)
        return _link(target, table, ())


def _link(tree_id: str, table: dict, chain: tuple) -> BtNode:
    if tree_id in chain:
        raise SubTreeCycle(list(chain[chain.index(tree_id):]) + [tree_id])
    if tree_id not in table:
        raise DanglingSubTree(tree_id)
    root = table[tree_id].copy()
    for node in root.walk():
        if isinstance(node, SubTreeNode) and not node.linked:
            node.link(_link(node.tree_id, table, chain + (tree_id,)))
    return root


_RESERVED_ATTRS = ("ID", "name")


def _ports_of(elem) -> dict:
    return {k: v for k, v in elem.attrib.items() if k not in _RESERVED_ATTRS}


def _int_attr(elem, attr: str) -> int:
    raw = elem.get(attr)
    if raw is None:
        raise MissingAttribute(elem.tag, attr)
    try:
        return int(raw)
    except ValueError:
        raise BadAttribute(elem.tag, attr, raw) from None


def _require_children(elem, nodes, at_least=1):
    if len(nodes) < at_least:
        raise BadStructure(f"<{elem.tag}> requires at least {at_least} child node(s)")


def _build_node(elem) -> BtNode:
    tag = elem.tag
    name = elem.get("name", "")

    if tag in ("Action", "Condition"):
        if len(elem) > 0:
            raise BadStructure(f"<{tag}> leaves cannot have children")
        leaf_id = elem.get("ID")
        if leaf_id is None:
            raise MissingAttribute(tag, "ID")
        cls = ActionNode if tag == "Action" else ConditionNode
        return cls(leaf_id, name, _ports_of(elem))

    if tag == "SubTree":
        if len(elem) > 0:
            raise BadStructure("<SubTree> references cannot have children")
        tree_id = elem.get("ID")
        if tree_id is None:
            raise MissingAttribute(tag, "ID")
        return SubTreeNode(tree_id, _ports_of(elem), name)

    children = [_build_node(child) for child in elem]

    if tag in ("Repeat", "Retry"):
        if len(children) != 1:
            raise BadStructure(f"<{tag}> requires exactly one child node")
        if tag == "Repeat":
            return RepeatNode(_int_attr(elem, "num_cycles"), children[0], name)
        return RetryNode(_int_attr(elem, "num_attempts"), children[0], name)

    composites = {
        "Sequence": SequenceNode,
        "ReactiveSequence": ReactiveSequenceNode,
        "Fallback": FallbackNode,
        "ReactiveFallback": ReactiveFallbackNode,
    }
    if tag in composites:
        _require_children(elem, children)
        return composites[tag](children, name)

    if tag == "Parallel":
        _require_children(elem, children)
        threshold = elem.get("success_threshold")
        if threshold is None:
            raise MissingAttribute(tag, "success_threshold")
        try:
            threshold = int(threshold)
        except ValueError:
            raise BadThreshold(f"success_threshold={threshold!r} is not an integer") from None
        try:
            return ParallelNode(threshold, children, name)
        except InvalidThreshold as exc:
            raise BadThreshold(str(exc)) from None

    raise UnknownElement(tag)


def parse_bt_xml(text: str, *, source_path: str = "",
                 external_ids=()) -> BtDocument:
    """Parse one XML document into named trees.

    SubTree references must resolve within the document or to an id listed in
    external_ids (trees loaded earlier into the same store); the reference
    graph over this document must be acyclic.
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line, column = exc.position
        raise XmlSyntax(line, column, exc.msg if hasattr(exc, "msg") else str(exc)) from None

    if root.tag != "root":
        raise UnknownElement(root.tag)
    main_tree_id = root.get("main_tree_to_execute")
    if main_tree_id is None:
        raise MissingAttribute("root", "main_tree_to_execute")

    trees: dict = {}
    for elem in root:
        if elem.tag != "BehaviorTree":
            raise UnknownElement(elem.tag)
        tree_id = elem.get("ID")
        if tree_id is None:
            raise MissingAttribute("BehaviorTree", "ID")
        nodes = list(elem)
        if len(nodes) != 1:
            raise BadStructure(f"BehaviorTree {tree_id!r} must contain exactly one node")
        try:
            trees[tree_id] = _build_node(nodes[0])
        except TreeStructureError as exc:
            raise BadStructure(str(exc)) from None

    if main_tree_id not in trees:
        raise DanglingSubTree(main_tree_id)

    known = set(trees) | set(external_ids)
    for tree_id, tree in trees.items():
        for node in tree.walk():
            if isinstance(node, SubTreeNode) and node.tree_id not in known:
                raise DanglingSubTree(node.tree_id)
    _check_cycles(trees)

    return BtDocument(main_tree_id, trees, source_path)


def _check_cycles(trees: dict) -> None:
    def refs(tree_id):
        return [n.tree_id for n in trees[tree_id].walk()
                if isinstance(n, SubTreeNode) and n.tree_id in trees]

    visiting: list = []
    done: set = set()

    def visit(tree_id):
        if tree_id in done:
            return
        if tree_id in visiting:
            raise SubTreeCycle(visiting[visiting.index(tree_id):] + [tree_id])
        visiting.append(tree_id)
        for ref in refs(tree_id):
            visit(ref)
        visiting.pop()
        done.add(tree_id)

    for tree_id in trees:
        visit(tree_id)


def load_bt_file(path: str, *, external_ids=()) -> BtDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_bt_xml(fh.read(), source_path=str(path), external_ids=external_ids)


# ---------------------------------------------------------------------------
# Serialization — deterministic attribute order for byte-stable output
# ---------------------------------------------------------------------------

def _node_attrs(node: BtNode) -> list:
    attrs = []
    if isinstance(node, (ActionNode, ConditionNode)):
        attrs.append(("ID", node.leaf_id))
        if node.name != node.leaf_id:
            attrs.append(("name", node.name))
        attrs.extend(sorted(node.ports.items()))
    elif isinstance(node, SubTreeNode):
        attrs.append(("ID", node.tree_id))
        if node.name != node.tree_id:
            attrs.append(("name", node.name))
        attrs.extend(sorted(node.remaps.items()))
    else:
        if node.name != node.kind:
            attrs.append(("name", node.name))
        if isinstance(node, ParallelNode):
            attrs.append(("success_threshold", str(node.success_threshold)))
        elif isinstance(node, RepeatNode):
            attrs.append(("num_cycles", str(node.num_cycles)))
        elif isinstance(node, RetryNode):
            attrs.append(("num_attempts", str(node.num_attempts)))
    return attrs


def _write_node(node: BtNode, lines: list, depth: int) -> None:
    pad = "  " * depth
    attrs = "".join(f" {k}={quoteattr(str(v))}" for k, v in _node_attrs(node))
    children = [] if isinstance(node, SubTreeNode) else node.children
    if not children:
        lines.append(f"{pad}<{node.kind}{attrs}/>")
        return
    lines.append(f"{pad}<{node.kind}{attrs}>")
    for child in children:
        _write_node(child, lines, depth + 1)
    lines.append(f"{pad}</{node.kind}>")


def serialize(doc: BtDocument) -> str:
    """Emit the document as UTF-8 XML text; output is byte-stable."""
    lines = [f'<root main_tree_to_execute={quoteattr(doc.main_tree_id)}>']
    for tree_id in sorted(doc.trees, key=lambda t: (t != doc.main_tree_id, t)):
        lines.append(f'  <BehaviorTree ID={quoteattr(tree_id)}>')
        _write_node(doc.trees[tree_id], lines, 2)
        lines.append("  </BehaviorTree>")
    lines.append("</root>")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Validation — issues are collected, not thrown
# ---------------------------------------------------------------------------

def validate(doc: BtDocument, registry: LeafRegistry, *, external_ids=()) -> list:
    """Check leaf registration, arity, thresholds, port sources, and subtree
    references; returns an empty list when the document is executable.

    external_ids lists tree ids resolvable outside this document.
    """
    issues: list[ValidationIssue] = []
    known_external = set(external_ids)

    for tree_id, tree in doc.trees.items():
        for node in tree.walk():
            if isinstance(node, (ActionNode, ConditionNode)):
                if node.children:
                    issues.append(ValidationIssue(
                        "bad_arity", "leaf has children", tree_id, node.name))
                impl = registry.lookup(node.leaf_id)
                if impl is None:
                    issues.append(ValidationIssue(
                        "unregistered_leaf",
                        f"no implementation for {node.leaf_id!r}",
                        tree_id, node.name))
                    continue
                for port in impl.input_ports:
                    if port not in node.ports:
                        issues.append(ValidationIssue(
                            "missing_port",
                            f"input port {port!r} has no remap or literal",
                            tree_id, node.name))
            elif isinstance(node, ParallelNode):
                if not 1 <= node.success_threshold <= len(node.children):
                    issues.append(ValidationIssue(
                        "bad_threshold",
                        f"success_threshold {node.success_threshold} out of "
                        f"range for {len(node.children)} children",
                        tree_id, node.name))
            elif isinstance(node, (RepeatNode, RetryNode)):
                if len(node.children) != 1:
                    issues.append(ValidationIssue(
                        "bad_arity", "decorator must have exactly one child",
                        tree_id, node.name))
            elif isinstance(node, SubTreeNode):
                if (node.tree_id not in doc.trees
                        and node.tree_id not in known_external
                        and not node.linked):
                    issues.append(ValidationIssue(
                        "dangling_subtree",
                        f"references unknown tree {node.tree_id!r}",
                        tree_id, node.name))
            elif not node.children:
                issues.append(ValidationIssue(
                    "bad_arity", "composite has no children", tree_id, node.name))

    try:
        _check_cycles(doc.trees)
    except SubTreeCycle as exc:
        issues.append(ValidationIssue("subtree_cycle", str(exc)))
    if doc.main_tree_id not in doc.trees:
        issues.append(ValidationIssue(
            "dangling_subtree", f"main tree {doc.main_tree_id!r} is not defined"))
    return issues

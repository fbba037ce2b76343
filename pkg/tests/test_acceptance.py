"""End-to-end acceptance checks.

Each test covers one required behavior of the engine, prints a single
[PASS]/[FAIL] line naming it, and fails loudly when the behavior drifts.
Oracles are independent formulations (truth tables, exhaustive valuation
sweeps, layer-counting breadth-first search), never the engine's own code.
"""

import itertools
import os
import random
import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

from hfsmbt.bridge import BtSession
from hfsmbt.btree.blackboard import Blackboard, LeafRegistry, TickContext
from hfsmbt.btree.core import (
    ActionNode,
    ConditionNode,
    FallbackNode,
    ParallelNode,
    ReactiveFallbackNode,
    ReactiveSequenceNode,
    SequenceNode,
    reduce_fallback,
    reduce_parallel,
    reduce_sequence,
    same_structure,
    tick_root,
)
from hfsmbt.btree.decision import FAIL, SUCCEED, evaluate, to_decision_list
from hfsmbt.btree.status import NodeStatus
from hfsmbt.btree.xmlio import load_bt_file, parse_bt_xml, serialize
from hfsmbt.events import EventBus
from hfsmbt.fsm.executive import Executive
from hfsmbt.manifest import build_machine, build_world, load_manifest
from hfsmbt.nav.leaves import make_nav_registry
from hfsmbt.nav.world import (
    GoalUnreachable,
    GridWorld,
    plan_path,
    random_world,
)
from hfsmbt.report import read_capture
from hfsmbt.script import load_script, parse_script
from hfsmbt.server import protocol
from hfsmbt.server.client import BtClient
from hfsmbt.server.service import BtServer

from .test_nav import bfs_distance
from .treegen import all_valuations, condition_ids, random_memoryless_tree, valuation_registry

REPO = Path(__file__).resolve().parent.parent

S = NodeStatus.SUCCESS
F = NodeStatus.FAILURE
R = NodeStatus.RUNNING


@contextmanager
def criterion(capsys, label):
    """Print one pass/fail line for the wrapped checks."""
    try:
        yield
    except BaseException:
        with capsys.disabled():
            print(f"\n[FAIL] {label}", flush=True)
        raise
    with capsys.disabled():
        print(f"\n[PASS] {label}", flush=True)


def fresh_ctx():
    import threading

    return TickContext(cancel=threading.Event())


# -- 1: composite reductions --------------------------------------------------

def oracle_sequence(vec):
    for status in vec:
        if status is not S:
            return status
    return S


def oracle_fallback(vec):
    for status in vec:
        if status is not F:
            return status
    return F


def oracle_parallel(threshold, vec):
    successes = sum(1 for v in vec if v is S)
    failures = sum(1 for v in vec if v is F)
    if successes >= threshold:
        return S
    if failures > len(vec) - threshold:
        return F
    return R


def fixed_registry(vec):
    registry = LeafRegistry()
    for i, status in enumerate(vec):
        registry.register(f"n{i}", lambda bb, ctx, _s=status: _s)
    return registry


def ticked(make_tree, vec):
    tree = make_tree([ActionNode(f"n{i}") for i in range(len(vec))])
    return tick_root(tree, Blackboard(), fixed_registry(vec), fresh_ctx())


def test_01_composite_reductions(capsys):
    compared = 0
    started = time.perf_counter()
    vectors = [vec for n in range(1, 5)
               for vec in itertools.product((S, F, R), repeat=n)]
    for vec in vectors:
        assert reduce_sequence(vec) is oracle_sequence(vec), vec
        assert reduce_fallback(vec) is oracle_fallback(vec), vec
        assert ticked(SequenceNode, vec) is oracle_sequence(vec), vec
        assert ticked(ReactiveSequenceNode, vec) is oracle_sequence(vec), vec
        assert ticked(FallbackNode, vec) is oracle_fallback(vec), vec
        assert ticked(ReactiveFallbackNode, vec) is oracle_fallback(vec), vec
        compared += 6
        for m in range(1, len(vec) + 1):
            expected = oracle_parallel(m, vec)
            assert reduce_parallel(m, vec) is expected, (m, vec)
            got = ticked(lambda ch, _m=m: ParallelNode(_m, ch), vec)
            assert got is expected, (m, vec)
            compared += 2
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, f"took {elapsed:.2f}s"
    with criterion(capsys, f"composite reductions match the truth-table "
                           f"oracle on all {len(vectors)} status vectors of "
                           f"length <= 4 ({compared} comparisons, "
                           f"{elapsed:.2f}s, 0 mismatches)"):
        pass


# -- 2: decision-list equivalence ---------------------------------------------

def reached_leaf(tree, valuation):
    """Reached action (or terminal sentinel) for one fresh tick."""
    invoked = []
    registry = valuation_registry(valuation, invoked)
    tree.halt()
    status = tick_root(tree, Blackboard(), registry, fresh_ctx())
    if status is NodeStatus.RUNNING:
        assert len(invoked) == 1
        return invoked[0]
    assert invoked == []
    return SUCCEED if status is NodeStatus.SUCCESS else FAIL


def test_02_decision_list_equivalence(capsys):
    master = random.Random(20260816)
    trees = 500
    checked = 0
    started = time.perf_counter()
    for _ in range(trees):
        tree = random_memoryless_tree(random.Random(master.randrange(10 ** 9)))
        rules = to_decision_list(tree)
        for valuation in all_valuations(condition_ids(tree)):
            assert evaluate(rules, valuation) == reached_leaf(tree, valuation)
            checked += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"took {elapsed:.2f}s"
    with criterion(capsys, f"{trees} random memoryless trees: tick result "
                           f"equals decision-list evaluation on every "
                           f"valuation ({checked} valuations, {elapsed:.2f}s)"):
        pass


# -- 3: memory fallback falls through after a late failure --------------------

def meal_trace(dispose_status):
    log = []
    registry = LeafRegistry()
    for leaf_id, status in (("NotHungry", F), ("Unwrap", S), ("Consume", S),
                            ("Dispose", dispose_status), ("EatApple", S)):
        def fn(bb, ctx, _id=leaf_id, _s=status):
            log.append(_id)
            return _s

        registry.register(leaf_id, fn)
    tree = FallbackNode([
        ConditionNode("NotHungry"),
        SequenceNode([ActionNode("Unwrap"), ActionNode("Consume"),
                      ActionNode("Dispose")], name="eat_meal"),
        ActionNode("EatApple"),
    ], name="satisfy_hunger")
    status = tick_root(tree, Blackboard(), registry, fresh_ctx())
    return status, log


def test_03_memory_fallback_late_failure(capsys):
    with criterion(capsys, "memory fallback after a late step failure runs "
                           "the alternative without repeating finished work; "
                           "on success the alternative never runs"):
        status, log = meal_trace(F)
        assert status is S
        assert log == ["NotHungry", "Unwrap", "Consume", "Dispose", "EatApple"]
        assert "Consume" in log and "EatApple" in log

        status, log = meal_trace(S)
        assert status is S
        assert log == ["NotHungry", "Unwrap", "Consume", "Dispose"]
        assert "EatApple" not in log


# -- 4: patrol demo end to end ------------------------------------------------

def run_cli(*argv, timeout=90):
    env = dict(os.environ)
    env.pop("HFSMBT_BT_PORT", None)
    env.pop("HFSMBT_MIRROR_PORT", None)
    return subprocess.run([sys.executable, "-m", "hfsmbt.cli", *argv],
                          capture_output=True, text=True, timeout=timeout,
                          cwd=str(REPO), env=env)


def test_04_patrol_demo(capsys, tmp_path):
    capture = tmp_path / "patrol.capture"
    started = time.monotonic()
    proc = run_cli("run", "demo/patrol.toml",
                   "--script", "demo/scripts/patrol_goals.cmds",
                   "--capture", str(capture), "--no-mirror", "--bt-port", "0")
    elapsed = time.monotonic() - started
    with criterion(capsys, f"patrol demo: 3 goal/navigate cycles all "
                           f"succeed, exit code 0 ({elapsed:.1f}s wall)"):
        assert proc.returncode == 0, proc.stderr
        assert elapsed < 30.0
        events, _ = read_capture(str(capture))
        entries = [e.data["state"] for e in events if e.kind == "state_entered"]
        assert entries.count("Navigate") == 3
        assert entries.count("GetGoal") == 4
        navigate_outcomes = [e.data["outcome"] for e in events
                             if e.kind == "outcome_emitted"
                             and e.data["state"] == "Navigate"]
        assert navigate_outcomes == ["done", "done", "done"]
        finished = [e for e in events if e.kind == "behavior_finished"]
        assert finished[-1].data["outcome"] == "done"


# -- 5: split planner/controller demo -----------------------------------------

class DemoRig:
    """One manifest assembled exactly the way the CLI does, kept in-process
    so leaf counters and the server blackboard stay inspectable."""

    def __init__(self, manifest_name, *, autonomy, script_text=None,
                 script_path=None):
        self.manifest = load_manifest(str(REPO / "demo" / manifest_name))
        world, schedule, tick_ms = build_world(self.manifest)
        self.world = world
        registry, self.leaves = make_nav_registry(world)
        self.server = BtServer(port=0, registry=registry, world=world,
                               schedule=schedule, tick_ms=tick_ms)
        self.server.start()
        self.bus = EventBus()
        self.session = BtSession("127.0.0.1", self.server.port)
        machine, feed = build_machine(self.manifest, self.session, bus=self.bus)
        self.executive = Executive(machine, period_ms=self.manifest.period_ms,
                                   realtime=True, autonomy=autonomy,
                                   bus=self.bus, goal_feed=feed)
        if script_path is not None:
            self.executive.add_script(load_script(str(script_path)))
        if script_text is not None:
            self.executive.add_script(parse_script(script_text))

    def run(self):
        try:
            return self.executive.run(max_cycles=2000)
        finally:
            self.session.close()
            self.server.stop()

    def events(self):
        return self.bus.snapshot()


def test_05_split_planner_controller(capsys):
    with criterion(capsys, "split demo: controller consumes the planned "
                           "route with zero replans, a forced failure routes "
                           "through recovery, and a dead-end recovery ends "
                           "the behavior failed"):
        doc = load_bt_file(str(REPO / "demo" / "trees" / "split.xml"))
        for tree_id in ("FollowRoute", "Recovery"):
            tree = doc.instantiate(tree_id)
            assert all(getattr(node, "leaf_id", None) != "ComputePathToPose"
                       for node in tree.walk()), tree_id

        rig = DemoRig("courier.toml", autonomy="full",
                      script_path=REPO / "demo" / "scripts" / "courier_forced.cmds")
        outcome = rig.run()
        assert outcome == "done"
        assert rig.leaves.compute_path.invocations == 1
        assert rig.world.robot_cell == (18, 1)
        path = rig.server.blackboard.snapshot().get("path")
        assert path and len(path) == 18

        events = rig.events()
        forced = [e for e in events if e.kind == "outcome_emitted"
                  and e.data.get("forced")]
        assert len(forced) == 1
        assert forced[0].data["state"] == "Follow"
        assert forced[0].data["outcome"] == "failed"
        follow_entered = next(e for e in events if e.kind == "state_entered"
                              and e.data["state"] == "Follow")
        moving = [e for e in events if e.kind == "bt_feedback"
                  and follow_entered.seq < e.seq < forced[0].seq]
        assert moving, "force did not land mid-navigation"
        recover_entered = next(e for e in events if e.kind == "state_entered"
                               and e.data["state"] == "Recover")
        assert recover_entered.seq > forced[0].seq
        recover_done = next(e for e in events if e.kind == "outcome_emitted"
                            and e.data["state"] == "Recover")
        assert recover_done.data["outcome"] == "done"
        assert any(e.kind == "state_entered" and e.data["state"] == "Follow"
                   and e.seq > recover_done.seq for e in events)

        dead = DemoRig("courier_deadend.toml", autonomy="full")
        outcome = dead.run()
        assert outcome == "failed"
        assert dead.leaves.clear.invocations >= 1
        assert dead.leaves.backup.invocations >= 1
        recover_failed = next(e for e in dead.events()
                              if e.kind == "outcome_emitted"
                              and e.data["state"] == "Recover")
        assert recover_failed.data["outcome"] == "failed"


# -- 6: autonomy gating --------------------------------------------------------

GATED_SCRIPT = """
0 goal 18 1
0 end_goals
500 confirm_transition
"""


def test_06_autonomy_gating(capsys):
    with criterion(capsys, "a high-gated transition blocks at low autonomy "
                           "until the scripted confirm at t=500 ms and never "
                           "blocks at full autonomy"):
        rig = DemoRig("courier.toml", autonomy="low", script_text=GATED_SCRIPT)
        outcome = rig.run()
        assert outcome == "done"
        events = rig.events()
        blocked = [e for e in events if e.kind == "transition_blocked"]
        assert len(blocked) == 1
        assert blocked[0].data["state"] == "Plan"
        assert blocked[0].data["outcome"] == "done"
        emitted = next(e for e in events if e.kind == "outcome_emitted"
                       and e.data["state"] == "Plan")
        assert emitted.data["forced"] is False
        assert emitted.data["confirmed"] is True
        assert blocked[0].seq < emitted.seq
        assert emitted.t_ms >= 500.0
        ack = next(e for e in events if e.kind == "command_ack"
                   and e.data["command"] == "confirm_transition")
        assert ack.data["applied"] is True
        follow_entered = next(e for e in events if e.kind == "state_entered"
                              and e.data["state"] == "Follow")
        assert follow_entered.seq > emitted.seq

        rig = DemoRig("courier.toml", autonomy="full", script_text=GATED_SCRIPT)
        outcome = rig.run()
        assert outcome == "done"
        assert [e for e in rig.events()
                if e.kind == "transition_blocked"] == []


# -- 7: cancel latency ---------------------------------------------------------

CANCEL_TREE_XML = """
<root main_tree_to_execute="Nav">
  <BehaviorTree ID="Nav">
    <Fallback>
      <Condition ID="GoalReached" goal="{goal}"/>
      <Sequence>
        <Action ID="ComputePathToPose" goal="{goal}"/>
        <Action ID="FollowPath" path="{path}"/>
      </Sequence>
    </Fallback>
  </BehaviorTree>
</root>
"""


def test_07_cancel_latency(capsys):
    tick_ms = 20
    trials = 50
    world = GridWorld.from_text("S" + "." * 29 + "\n")
    registry, _ = make_nav_registry(world)
    server = BtServer(port=0, registry=registry, world=world, tick_ms=tick_ms)
    server.start()
    client = BtClient(port=server.port)
    worst = 0.0
    try:
        client.connect()
        result = client.load(CANCEL_TREE_XML)
        assert result["type"] == protocol.MSG_LOAD_RESULT and result["ok"]
        rng = random.Random(73)
        for trial in range(trials):
            goal = (29, 0) if world.robot_cell[0] < 15 else (0, 0)
            goal_id = client.send_execute([world.pose_of(goal)], "Nav")
            log = []

            def drain():
                for message in client.poll():
                    log.append(message)

            def wait(pred, budget=5.0):
                deadline = time.monotonic() + budget
                while time.monotonic() < deadline:
                    drain()
                    for message in log:
                        if pred(message):
                            return message
                    time.sleep(0.002)
                raise AssertionError(f"trial {trial}: nothing matched")

            wait(lambda m: m.get("id") == goal_id
                 and m["type"] == protocol.MSG_EXECUTE_FEEDBACK
                 and any("FollowPath" in node for node in m["active_nodes"]))
            time.sleep(rng.uniform(0.0, 6.0) * tick_ms / 1000.0)
            cancel_at = time.monotonic()
            client.send_cancel(goal_id)
            result = wait(lambda m: m.get("id") == goal_id
                          and m["type"] in (protocol.MSG_EXECUTE_RESULT,
                                            protocol.MSG_REJECT))
            latency = time.monotonic() - cancel_at
            worst = max(worst, latency)
            assert result["type"] == protocol.MSG_EXECUTE_RESULT
            assert result["status"] == protocol.RESULT_CANCELED
            assert latency <= 2 * tick_ms / 1000.0, (
                f"trial {trial}: {latency * 1000:.1f}ms")
            time.sleep(3 * tick_ms / 1000.0)
            drain()
            tail = log[log.index(result) + 1:]
            assert all(not (m.get("id") == goal_id
                            and m["type"] == protocol.MSG_EXECUTE_FEEDBACK)
                       for m in tail), f"trial {trial}: feedback after result"
    finally:
        client.close()
        server.stop()
    with criterion(capsys, f"cancel during path following: {trials} "
                           f"random-tick trials all CANCELED within 2 tick "
                           f"periods (worst {worst * 1000:.1f}ms of "
                           f"{2 * tick_ms}ms), no feedback after any "
                           f"result"):
        pass


# -- 8: XML round trip -----------------------------------------------------

def test_08_xml_round_trip(capsys):
    corpus = sorted((REPO / "tests" / "fixtures").glob("*.xml"))
    corpus += sorted((REPO / "demo" / "trees").glob("*.xml"))
    assert len(corpus) >= 7
    for path in corpus:
        doc_a = parse_bt_xml(path.read_text(), source_path=str(path))
        first = serialize(doc_a)
        doc_b = parse_bt_xml(first, source_path=f"{path}:round1")
        assert doc_b.main_tree_id == doc_a.main_tree_id, path
        assert set(doc_b.trees) == set(doc_a.trees), path
        for tree_id in doc_a.trees:
            assert same_structure(doc_a.trees[tree_id],
                                  doc_b.trees[tree_id]), (path, tree_id)
        assert serialize(doc_b) == first, path
    with criterion(capsys, f"tree XML round trip: structural identity and "
                           f"byte-stable second serialization across "
                           f"{len(corpus)} corpus files"):
        pass


# -- 9: planner optimality ---------------------------------------------------

def test_09_planner_optimality(capsys):
    rng = random.Random(424242)
    reachable = unreachable = 0
    for _ in range(200):
        width = rng.randrange(4, 21)
        height = rng.randrange(4, 21)
        density = rng.choice([0.15, 0.3, 0.45])
        world = random_world(rng.randrange(10 ** 9), width, height,
                             obstacle_density=density)
        free = [(c, r) for r in range(height) for c in range(width)
                if not world.occupied((c, r))]
        goal = rng.choice(free)
        expected = bfs_distance(world, world.robot_cell, goal)
        try:
            path = plan_path(world, world.robot_pose, world.pose_of(goal))
        except GoalUnreachable:
            actual = None
        else:
            actual = len(path) - 1
        assert actual == expected, (world.seed, world.robot_cell, goal)
        if expected is None:
            unreachable += 1
        else:
            reachable += 1
    assert reachable and unreachable
    with criterion(capsys, f"planned path length equals the breadth-first "
                           f"oracle on 200 random worlds <= 20x20 "
                           f"({reachable} reachable, {unreachable} "
                           f"unreachable, all exact)"):
        pass

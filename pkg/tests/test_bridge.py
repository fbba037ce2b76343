"""Bridge states driving a live tree server from inside a state machine."""

import time

import pytest

from hfsmbt.bridge import BtExecuteGoalState, BtExecuteState, BtLoaderState, BtSession
from hfsmbt.btree.blackboard import Pose
from hfsmbt.events import EventBus
from hfsmbt.fsm.userdata import UserData
from hfsmbt.nav.leaves import make_nav_registry
from hfsmbt.nav.world import GridWorld
from hfsmbt.server.service import BtServer

NAV_XML = """
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


@pytest.fixture
def rig():
    world = GridWorld.from_text("S" + "." * 14 + "\n")
    registry, leaves = make_nav_registry(world)
    server = BtServer(port=0, registry=registry, world=world, tick_ms=10)
    server.start()
    session = BtSession(port=server.port, feedback_timeout_ms=1500)
    yield server, session, world
    session.close()
    server.stop()


def step_until(state, ud, *, timeout=5.0, settle=0.005):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        outcome = state.execute_step(ud)
        if outcome is not None:
            return outcome
        time.sleep(settle)
    raise AssertionError("state never settled")


def test_loader_state_requires_exactly_one_source(rig):
    _, session, _ = rig
    with pytest.raises(ValueError):
        BtLoaderState(session)
    with pytest.raises(ValueError):
        BtLoaderState(session, xml="<root/>", path="also.xml")


def test_loader_done_on_clean_load(rig):
    _, session, _ = rig
    state = BtLoaderState(session, xml=NAV_XML)
    ud = UserData()
    state.on_enter(ud)
    assert step_until(state, ud) == "done"


def test_loader_failed_carries_server_errors(rig):
    _, session, _ = rig
    bad = NAV_XML.replace(' path="{path}"', "")
    state = BtLoaderState(session, xml=bad)
    ud = UserData()
    state.on_enter(ud)
    assert step_until(state, ud) == "failed"
    assert any("missing_port" in e for e in ud.get("load_errors"))


def test_loader_failed_when_server_unreachable():
    session = BtSession(port=1, feedback_timeout_ms=200)
    state = BtLoaderState(session, xml=NAV_XML)
    ud = UserData()
    state.on_enter(ud)
    assert step_until(state, ud, timeout=3.0) == "failed"
    assert ud.get("load_errors")


def test_execute_goal_runs_to_done_and_republishes_feedback(rig):
    server, session, world = rig
    bus = EventBus()
    loader = BtLoaderState(session, xml=NAV_XML)
    ud = UserData()
    loader.on_enter(ud)
    assert step_until(loader, ud) == "done"

    state = BtExecuteGoalState(session, bus=bus)
    ud.set("goal", Pose(6, 0))
    state.on_enter(ud)
    assert step_until(state, ud) == "done"
    assert world.robot_cell == (6, 0)
    feedback = [e for e in bus.snapshot() if e.kind == "bt_feedback"]
    assert feedback
    assert feedback[-1].data["robot_pose"]["x"] == 6.0
    assert "active_nodes" in feedback[0].data


def test_execute_goal_missing_goal_fails_without_wire_traffic(rig):
    server, session, _ = rig
    state = BtExecuteGoalState(session)
    ud = UserData()
    state.on_enter(ud)
    assert state.execute_step(ud) == "failed"
    # nothing was sent: the server never saw an execute for this state
    assert state._goal_id is None


def test_execute_goal_prefers_goals_list(rig):
    server, session, world = rig
    loader = BtLoaderState(session, xml=NAV_XML)
    ud = UserData()
    loader.on_enter(ud)
    step_until(loader, ud)
    state = BtExecuteGoalState(session)
    ud.set("goal", Pose(1, 0))
    ud.set("goals", [Pose(3, 0), Pose(9, 0)])
    state.on_enter(ud)
    assert step_until(state, ud) == "done"
    # first list entry is the active goal
    assert world.robot_cell == (3, 0)
    assert server.blackboard.snapshot()["goals"] == [Pose(3.0, 0.0), Pose(9.0, 0.0)]


def test_execute_failed_on_unreachable_goal(rig):
    server, session, world = rig
    world.add_dynamic_obstacle((1, 0))  # walls off the single-row corridor
    loader = BtLoaderState(session, xml=NAV_XML)
    ud = UserData()
    loader.on_enter(ud)
    step_until(loader, ud)
    state = BtExecuteGoalState(session)
    ud.set("goal", Pose(9, 0))
    state.on_enter(ud)
    assert step_until(state, ud) == "failed"


def test_execute_failed_on_reject_without_load(rig):
    _, session, _ = rig
    state = BtExecuteGoalState(session)
    ud = UserData()
    ud.set("goal", Pose(2, 0))
    state.on_enter(ud)
    assert step_until(state, ud) == "failed"


def test_execute_preempt_cancels_and_waits_for_result(rig):
    server, session, world = rig
    loader = BtLoaderState(session, xml=NAV_XML)
    ud = UserData()
    loader.on_enter(ud)
    step_until(loader, ud)
    state = BtExecuteGoalState(session)
    ud.set("goal", Pose(14, 0))
    state.on_enter(ud)
    state.execute_step(ud)  # sends the goal
    time.sleep(0.05)        # let a few ticks happen
    state.on_preempt(ud)
    # server idle again: a fresh goal is accepted, not rejected busy
    state2 = BtExecuteGoalState(session)
    ud.set("goal", Pose(2, 0))
    ud.set("goals", [])
    state2.on_enter(ud)
    assert step_until(state2, ud) == "done"


def test_execute_state_without_goals_uses_existing_blackboard(rig):
    server, session, world = rig
    plan_xml = """
    <root main_tree_to_execute="P">
      <BehaviorTree ID="P">
        <Action ID="ComputePathToPose" goal="{goal}"/>
      </BehaviorTree>
    </root>
    """
    follow_xml = """
    <root main_tree_to_execute="F">
      <BehaviorTree ID="F">
        <Action ID="FollowPath" path="{path}"/>
      </BehaviorTree>
    </root>
    """
    ud = UserData()
    for xml in (plan_xml, follow_xml):
        loader = BtLoaderState(session, xml=xml)
        loader.on_enter(ud)
        assert step_until(loader, ud) == "done"
    planner = BtExecuteGoalState(session, tree_id="P")
    ud.set("goal", Pose(7, 0))
    planner.on_enter(ud)
    assert step_until(planner, ud) == "done"
    follower = BtExecuteState(session, tree_id="F")
    follower.on_enter(ud)
    assert step_until(follower, ud) == "done"
    assert world.robot_cell == (7, 0)


def test_execute_feedback_timeout_fails(rig):
    server, session, _ = rig
    # a tree with no terminal state and a tick so slow nothing arrives
    # within the state's silence budget
    session.feedback_timeout_ms = 120
    server.tick_ms = 10_000
    loader = BtLoaderState(session, xml=NAV_XML)
    ud = UserData()
    loader.on_enter(ud)
    assert step_until(loader, ud, timeout=3.0) == "done"
    state = BtExecuteGoalState(session)
    ud.set("goal", Pose(14, 0))
    state.on_enter(ud)
    outcome = step_until(state, ud, timeout=5.0)
    assert outcome == "failed"

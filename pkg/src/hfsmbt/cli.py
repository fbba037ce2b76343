"""Command line entry points.

serve     run a tree execution server on a world
run       execute a manifest end to end (server, machine, mirror)
validate  check tree XML or a manifest without running anything
report    render figures and a CSV from a run capture

Exit codes: 0 when the behavior ends in the manifest's success outcome (or
was deliberately preempted), 1 for failures and validation issues, 2 when a
port is already taken, 3 for manifest errors.
"""

from __future__ import annotations

import argparse
import errno
import os
import signal
import sys

from .btree.blackboard import LeafRegistry
from .btree.xmlio import BtXmlError, load_bt_file, validate as validate_doc
from .bridge import BtSession
from .events import EventBus
from .fsm.commands import Preempt
from .fsm.executive import Executive
from .fsm.machine import RESERVED_OUTCOME
from .manifest import ManifestError, build_machine, build_world, load_manifest
from .mirror import MirrorServer, world_geometry
from .nav.world import GridWorld, ObstacleSchedule
from .nav.leaves import make_nav_registry
from .report import render_report, write_capture
from .script import ScriptError, load_script
from .server.protocol import DEFAULT_BT_PORT, DEFAULT_MIRROR_PORT
from .server.service import BtServer

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_PORT_IN_USE = 2
EXIT_MANIFEST = 3


def _port(flag_value, env_name: str, default: int) -> int:
    if flag_value is not None:
        return flag_value
    env_value = os.environ.get(env_name)
    if env_value:
        return int(env_value)
    return default


def _is_port_in_use(err: OSError) -> bool:
    return err.errno == errno.EADDRINUSE


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hfsmbt",
        description="Tree-in-machine orchestration: run behaviors, serve "
                    "trees, validate, and report.")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run a tree execution server")
    serve.add_argument("--world", help="grid map file")
    serve.add_argument("--schedule", help="obstacle schedule JSON")
    serve.add_argument("--bt-port", type=int, default=None,
                       help=f"TCP port (env HFSMBT_BT_PORT, default {DEFAULT_BT_PORT})")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--tick-ms", type=int, default=100)
    serve.add_argument("--cell-size", type=float, default=1.0)
    serve.add_argument("--seed", type=int, default=0)

    run = sub.add_parser("run", help="run a behavior manifest")
    run.add_argument("manifest")
    run.add_argument("--script", help="timed command script")
    run.add_argument("--capture", help="write the event stream here")
    run.add_argument("--bt-port", type=int, default=None)
    run.add_argument("--mirror-port", type=int, default=None)
    run.add_argument("--no-mirror", action="store_true")
    run.add_argument("--host", default="127.0.0.1")
    run.add_argument("--autonomy", default=None,
                     help="initial level: off, low, high, full")
    run.add_argument("--period-ms", type=int, default=None)
    run.add_argument("--tick-ms", type=int, default=None,
                     help="server tick override")
    run.add_argument("--max-cycles", type=int, default=None)
    run.add_argument("--logical", action="store_true",
                     help="logical clock, no sleeping")
    run.add_argument("--world", help="grid map override")
    run.add_argument("--seed", type=int, default=None)

    val = sub.add_parser("validate", help="check trees or a manifest")
    val.add_argument("paths", nargs="+")

    rep = sub.add_parser("report", help="render a capture into figures + CSV")
    rep.add_argument("capture")
    rep.add_argument("--out", default=None,
                     help="output directory (default: <capture dir>/report)")
    return parser


# -- serve -------------------------------------------------------------

def _cmd_serve(args) -> int:
    world = None
    registry = LeafRegistry()
    if args.world:
        world = GridWorld.from_file(args.world, cell_size=args.cell_size,
                                    seed=args.seed)
        registry, _ = make_nav_registry(world)
    schedule = (ObstacleSchedule.from_file(args.schedule)
                if args.schedule else None)
    port = _port(args.bt_port, "HFSMBT_BT_PORT", DEFAULT_BT_PORT)
    server = BtServer(host=args.host, port=port, registry=registry,
                      world=world, schedule=schedule, tick_ms=args.tick_ms)
    try:
        server.start()
    except OSError as err:
        if _is_port_in_use(err):
            print(f"error: port {port} is already in use", file=sys.stderr)
            return EXIT_PORT_IN_USE
        raise
    print(f"tree server listening on {server.host}:{server.port}")
    try:
        signal.pause()
    except (KeyboardInterrupt, AttributeError):
        pass
    finally:
        server.stop()
    return EXIT_OK


# -- run ---------------------------------------------------------------

def _cmd_run(args) -> int:
    try:
        manifest = load_manifest(args.manifest)
    except ManifestError as err:
        for problem in err.problems:
            print(f"manifest error: {problem}", file=sys.stderr)
        return EXIT_MANIFEST

    script_entries = []
    if args.script:
        try:
            script_entries = load_script(args.script)
        except (ScriptError, OSError) as err:
            print(f"script error: {err}", file=sys.stderr)
            return EXIT_MANIFEST

    try:
        world, schedule, tick_ms = build_world(manifest)
    except (OSError, ValueError) as err:
        print(f"manifest error: {err}", file=sys.stderr)
        return EXIT_MANIFEST
    if args.world:
        world = GridWorld.from_file(args.world,
                                    seed=args.seed if args.seed is not None
                                    else 0)
    if args.tick_ms is not None:
        tick_ms = args.tick_ms

    registry = LeafRegistry()
    if world is not None:
        registry, _ = make_nav_registry(world)
    bt_port = _port(args.bt_port, "HFSMBT_BT_PORT", DEFAULT_BT_PORT)
    server = BtServer(host=args.host, port=bt_port, registry=registry,
                      world=world, schedule=schedule, tick_ms=tick_ms)
    try:
        server.start()
    except OSError as err:
        if _is_port_in_use(err):
            print(f"error: port {bt_port} is already in use", file=sys.stderr)
            return EXIT_PORT_IN_USE
        raise

    bus = EventBus()
    session = BtSession(args.host, server.port)
    mirror = None
    try:
        try:
            machine, feed = build_machine(manifest, session, bus=bus)
        except ManifestError as err:
            for problem in err.problems:
                print(f"manifest error: {problem}", file=sys.stderr)
            return EXIT_MANIFEST

        executive = Executive(
            machine,
            period_ms=args.period_ms or manifest.period_ms,
            realtime=not args.logical,
            autonomy=args.autonomy or manifest.autonomy,
            bus=bus, goal_feed=feed)
        executive.add_script(script_entries)

        if not args.no_mirror:
            mirror_port = _port(args.mirror_port, "HFSMBT_MIRROR_PORT",
                                DEFAULT_MIRROR_PORT)
            mirror = MirrorServer(executive, host=args.host, port=mirror_port,
                                  world=world)
            try:
                mirror.start()
            except OSError as err:
                if _is_port_in_use(err):
                    print(f"error: port {mirror_port} is already in use",
                          file=sys.stderr)
                    return EXIT_PORT_IN_USE
                raise
            print(f"mirror on ws://{mirror.host}:{mirror.port}/mirror")

        previous = signal.getsignal(signal.SIGINT)
        signal.signal(signal.SIGINT,
                      lambda *_: executive.submit(Preempt()))
        try:
            outcome = executive.run(max_cycles=args.max_cycles)
        finally:
            signal.signal(signal.SIGINT, previous)

        print(f"{manifest.name}: {outcome} after {executive.cycle_index} cycles")
        if args.capture:
            write_capture(args.capture, bus.snapshot(),
                          world_geometry(world) if world is not None else None)
            print(f"capture written to {args.capture}")
        ok = outcome == manifest.success_outcome or outcome == RESERVED_OUTCOME
        return EXIT_OK if ok else EXIT_FAILED
    finally:
        if mirror is not None:
            mirror.stop()
        session.close()
        server.stop()


# -- validate ------------------------------------------------------------

def _cmd_validate(args) -> int:
    worst = EXIT_OK
    known: list = []
    world = GridWorld(1, 1)
    registry, _ = make_nav_registry(world)
    for path in args.paths:
        if path.endswith(".toml"):
            try:
                manifest = load_manifest(path)
            except ManifestError as err:
                for problem in err.problems:
                    print(f"{path}: {problem}")
                worst = max(worst, EXIT_MANIFEST)
                continue
            print(f"{path}: OK ({len(manifest.states)} states)")
            tree_files = [s.tree_file for s in manifest.states if s.tree_file]
            args_paths = tree_files
        else:
            args_paths = [path]
        for tree_path in args_paths:
            try:
                doc = load_bt_file(tree_path)
            except (OSError, BtXmlError) as err:
                print(f"{tree_path}: {err}")
                worst = max(worst, EXIT_FAILED)
                continue
            issues = validate_doc(doc, registry, external_ids=known)
            known.extend(doc.trees)
            if issues:
                for issue in issues:
                    print(f"{tree_path}: {issue}")
                worst = max(worst, EXIT_FAILED)
            else:
                print(f"{tree_path}: OK (trees: {', '.join(sorted(doc.trees))})")
    return worst


# -- report ------------------------------------------------------------

def _cmd_report(args) -> int:
    out_dir = args.out or os.path.join(
        os.path.dirname(os.path.abspath(args.capture)) or ".", "report")
    try:
        summary = render_report(args.capture, out_dir)
    except (OSError, ValueError, KeyError) as err:
        print(f"report error: {err}", file=sys.stderr)
        return EXIT_FAILED
    print(f"report: {summary['events']} events, {summary['states']} states, "
          f"{summary['trajectory_points']} trajectory points, "
          f"outcome {summary['outcome']}")
    for path in summary["files"]:
        print(f"  {path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "serve":
        return _cmd_serve(args)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "validate":
        return _cmd_validate(args)
    if args.command == "report":
        return _cmd_report(args)
    return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())

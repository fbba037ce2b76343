"""Run captures and rendered reports.

A capture is the event stream of one run as JSON lines, optionally preceded
by a world-geometry line, written with --capture and consumed by the report
command and the operator console's replay view.

render_report turns a capture into files: events.csv (the full stream,
delimited), timeline.png (state activity over time with block and force
marks), and trajectory.png (robot track over the grid) when the capture
holds world geometry.
"""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .events import MirrorEvent


def write_capture(path: str, events, world_geometry: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if world_geometry is not None:
            fh.write(json.dumps({"world": world_geometry}) + "\n")
        for event in events:
            fh.write(json.dumps(event.to_wire(), separators=(",", ":")) + "\n")


def read_capture(path: str) -> tuple:
    """(events, world_geometry | None)."""
    events = []
    geometry = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            payload = json.loads(line)
            if "world" in payload and "seq" not in payload:
                geometry = payload["world"]
                continue
            events.append(MirrorEvent.from_wire(payload))
    return events, geometry


def _write_csv(path: str, events) -> None:
    fields = ("seq", "t_ms", "kind", "state", "outcome", "forced", "level",
              "data")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for event in events:
            data = dict(event.data)
            row = [event.seq, f"{event.t_ms:.1f}", event.kind,
                   data.pop("state", ""), data.pop("outcome", ""),
                   data.pop("forced", ""), data.pop("level", ""),
                   json.dumps(data, separators=(",", ":")) if data else ""]
            writer.writerow(row)


def _render_timeline(path: str, events) -> int:
    lanes: dict = {}
    spans: list = []
    open_spans: dict = {}
    marks = {"blocked": [], "forced": [], "confirmed": []}
    t_end = max((e.t_ms for e in events), default=0.0)
    for event in events:
        key = event.data.get("path") or event.data.get("state")
        if event.kind == "state_entered":
            lanes.setdefault(key, len(lanes))
            open_spans[key] = event.t_ms
        elif event.kind == "state_exited" and key in open_spans:
            spans.append((key, open_spans.pop(key), event.t_ms))
        elif event.kind == "transition_blocked":
            marks["blocked"].append((key, event.t_ms))
        elif event.kind == "outcome_emitted":
            if event.data.get("forced"):
                marks["forced"].append((key, event.t_ms))
            elif event.data.get("confirmed"):
                marks["confirmed"].append((key, event.t_ms))
    for key, t0 in open_spans.items():
        spans.append((key, t0, t_end))

    fig, ax = plt.subplots(figsize=(10, max(2, 0.6 * len(lanes) + 1)))
    for key, t0, t1 in spans:
        lane = lanes.setdefault(key, len(lanes))
        ax.barh(lane, max(t1 - t0, 1.0), left=t0, height=0.5,
                color="#4878b0", edgecolor="none")
    styles = {"blocked": ("s", "#c44e52"), "forced": ("^", "#dd8452"),
              "confirmed": ("o", "#55a868")}
    for label, points in marks.items():
        if not points:
            continue
        marker, color = styles[label]
        xs = [t for key, t in points if key in lanes]
        ys = [lanes[key] for key, t in points if key in lanes]
        ax.scatter(xs, ys, marker=marker, color=color, zorder=3, label=label)
    ax.set_yticks(list(lanes.values()))
    ax.set_yticklabels(list(lanes.keys()), fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("t (ms)")
    ax.set_title("state activity")
    if any(marks.values()):
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return len(lanes)


def _render_trajectory(path: str, events, geometry: dict | None) -> int:
    points = []
    for event in events:
        if event.kind == "bt_feedback" and event.data.get("robot_pose"):
            pose = event.data["robot_pose"]
            points.append((pose["x"], pose["y"]))
    fig, ax = plt.subplots(figsize=(6, 6))
    if geometry:
        cell = geometry.get("cell_size", 1.0)
        for cx, cy in geometry.get("static_obstacles", []):
            ax.add_patch(plt.Rectangle((cx * cell - cell / 2,
                                        cy * cell - cell / 2),
                                       cell, cell, color="#444444"))
        ax.set_xlim(-cell, geometry.get("width", 1) * cell)
        ax.set_ylim(-cell, geometry.get("height", 1) * cell)
    if points:
        xs, ys = zip(*points)
        ax.plot(xs, ys, "-", color="#4878b0", linewidth=1.5)
        ax.plot(xs[0], ys[0], "o", color="#55a868", label="start")
        ax.plot(xs[-1], ys[-1], "x", color="#c44e52", label="end")
        ax.legend(loc="upper right", fontsize=8)
    ax.set_aspect("equal")
    ax.invert_yaxis()
    ax.set_title("robot trajectory")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return len(points)


def render_report(capture_path: str, out_dir: str) -> dict:
    events, geometry = read_capture(capture_path)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "events.csv")
    timeline_path = os.path.join(out_dir, "timeline.png")
    trajectory_path = os.path.join(out_dir, "trajectory.png")
    _write_csv(csv_path, events)
    lanes = _render_timeline(timeline_path, events)
    points = _render_trajectory(trajectory_path, events, geometry)
    outcome = None
    for event in events:
        if event.kind == "behavior_finished":
            outcome = event.data.get("outcome")
    return {
        "events": len(events),
        "states": lanes,
        "trajectory_points": points,
        "outcome": outcome,
        "files": [csv_path, timeline_path, trajectory_path],
    }

"""Timed command scripts for unattended runs.

Line format: `<at_ms> <command> [args...]`. Blank lines and lines starting
with `#` are skipped. Commands are the operator command set plus goal
injection, e.g.:

    0 goal 12 3
    0 end_goals
    500 set_autonomy high
    900 confirm_transition
    1200 force_transition failed Follow
    5000 preempt
"""

from __future__ import annotations

from .fsm.commands import CommandError, from_script_line


class ScriptError(Exception):
    def __init__(self, line_no: int, detail: str):
        super().__init__(f"line {line_no}: {detail}")
        self.line_no = line_no
        self.detail = detail


def parse_script(text: str) -> list:
    """[(at_ms, command), ...] sorted by time, stably keeping file order."""
    entries = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(" ")
        try:
            at_ms = float(head)
        except ValueError:
            raise ScriptError(line_no, f"expected a timestamp, got {head!r}")
        if at_ms < 0:
            raise ScriptError(line_no, "timestamp must be >= 0")
        try:
            command = from_script_line(rest)
        except CommandError as err:
            raise ScriptError(line_no, str(err)) from None
        if command is None:
            raise ScriptError(line_no, "timestamp without a command")
        entries.append((at_ms, command))
    entries.sort(key=lambda e: e[0])
    return entries


def load_script(path: str) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_script(fh.read())

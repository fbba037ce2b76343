/** State-path timeline: the rendered history of which states ran when.
 *
 * One entry per state_entered event, closed by the matching state_exited.
 * No client-side inference: every entry corresponds one-to-one to events
 * from the executive.
 */

import type { MirrorEvent } from "./events.js";

export interface TimelineEntry {
  path: string;
  state: string;
  enteredSeq: number;
  enteredMs: number;
  exitedSeq: number | null;
  exitedMs: number | null;
}

export function timelineOf(events: MirrorEvent[]): TimelineEntry[] {
  const entries: TimelineEntry[] = [];
  for (const event of events) {
    if (event.kind === "state_entered") {
      entries.push({
        path: (event.data["path"] as string | undefined) ?? (event.data["state"] as string),
        state: event.data["state"] as string,
        enteredSeq: event.seq,
        enteredMs: event.t_ms,
        exitedSeq: null,
        exitedMs: null,
      });
    } else if (event.kind === "state_exited") {
      const path = (event.data["path"] as string | undefined) ?? (event.data["state"] as string);
      for (let i = entries.length - 1; i >= 0; i--) {
        const entry = entries[i]!;
        if (entry.path === path && entry.exitedSeq === null) {
          entry.exitedSeq = event.seq;
          entry.exitedMs = event.t_ms;
          break;
        }
      }
    }
  }
  return entries;
}

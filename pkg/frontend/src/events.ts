/** Event stream types and the replay fold.
 *
 * The console holds no domain logic of its own: everything it shows is a
 * pure fold over the executive's event stream, so the same events always
 * render the same view. A sequence gap is an error, never a guess; the
 * client reacts by reconnecting for a fresh snapshot.
 */

export const EVENT_KINDS = [
  "behavior_started",
  "state_entered",
  "state_exited",
  "outcome_emitted",
  "transition_blocked",
  "autonomy_changed",
  "bt_feedback",
  "behavior_finished",
  "command_ack",
] as const;

export type EventKind = (typeof EVENT_KINDS)[number];

export interface MirrorEvent {
  seq: number;
  t_ms: number;
  kind: EventKind;
  data: Record<string, unknown>;
}

export interface RobotPose {
  x: number;
  y: number;
  heading: number;
}

export interface PendingBlock {
  state: string;
  path: string;
  outcome: string;
  required_level: number;
  outcomes?: string[];
}

export class SeqGapError extends Error {
  constructor(
    readonly expected: number,
    readonly got: number,
  ) {
    super(`sequence gap: expected ${expected}, got ${got}`);
  }
}

export interface MirrorState {
  lastSeq: number;
  started: boolean;
  finishedOutcome: string | null;
  autonomy: number | null;
  activeStates: string[];
  pendingBlock: PendingBlock | null;
  robotPose: RobotPose | null;
  activeNodes: string[];
  elapsedMs: number | null;
  outcomes: Record<string, unknown>[];
  blockedCount: number;
  forcedCount: number;
  acks: Record<string, unknown>[];
}

export function initialState(): MirrorState {
  return {
    lastSeq: 0,
    started: false,
    finishedOutcome: null,
    autonomy: null,
    activeStates: [],
    pendingBlock: null,
    robotPose: null,
    activeNodes: [],
    elapsedMs: null,
    outcomes: [],
    blockedCount: 0,
    forcedCount: 0,
    acks: [],
  };
}

export function applyEvent(state: MirrorState, event: MirrorEvent): MirrorState {
  const expected = state.lastSeq + 1;
  if (event.seq !== expected) {
    throw new SeqGapError(expected, event.seq);
  }
  const next: MirrorState = {
    ...state,
    lastSeq: event.seq,
    activeStates: [...state.activeStates],
    outcomes: [...state.outcomes],
    acks: [...state.acks],
  };
  const data = event.data;
  switch (event.kind) {
    case "behavior_started":
      next.started = true;
      break;
    case "state_entered":
      next.activeStates.push(data["state"] as string);
      break;
    case "state_exited": {
      const index = next.activeStates.indexOf(data["state"] as string);
      if (index >= 0) {
        next.activeStates.splice(index, 1);
      }
      break;
    }
    case "outcome_emitted":
      next.outcomes.push({ ...data });
      if (data["forced"]) {
        next.forcedCount += 1;
      }
      if (next.pendingBlock && next.pendingBlock.state === data["state"]) {
        next.pendingBlock = null;
      }
      break;
    case "transition_blocked":
      next.pendingBlock = { ...data } as unknown as PendingBlock;
      next.blockedCount += 1;
      break;
    case "autonomy_changed":
      next.autonomy = Number(data["level"]);
      if (next.pendingBlock && next.autonomy >= (next.pendingBlock.required_level ?? 0)) {
        next.pendingBlock = null;
      }
      break;
    case "bt_feedback":
      next.robotPose = (data["robot_pose"] as RobotPose | undefined) ?? null;
      next.activeNodes = [...((data["active_nodes"] as string[] | undefined) ?? [])];
      next.elapsedMs = (data["elapsed_ms"] as number | undefined) ?? null;
      break;
    case "behavior_finished":
      next.finishedOutcome = (data["outcome"] as string | undefined) ?? null;
      next.pendingBlock = null;
      break;
    case "command_ack":
      next.acks.push({ ...data });
      break;
  }
  return next;
}

export function replay(events: MirrorEvent[], into?: MirrorState): MirrorState {
  let state = into ?? initialState();
  for (const event of events) {
    state = applyEvent(state, event);
  }
  return state;
}

/** Parse one wire object into a MirrorEvent, rejecting unknown kinds. */
export function eventFromWire(payload: unknown): MirrorEvent {
  const raw = payload as Partial<MirrorEvent>;
  if (
    typeof raw?.seq !== "number" ||
    typeof raw?.t_ms !== "number" ||
    !EVENT_KINDS.includes(raw?.kind as EventKind)
  ) {
    throw new Error(`not an event: ${JSON.stringify(payload)}`);
  }
  return {
    seq: raw.seq,
    t_ms: raw.t_ms,
    kind: raw.kind as EventKind,
    data: (raw.data ?? {}) as Record<string, unknown>,
  };
}

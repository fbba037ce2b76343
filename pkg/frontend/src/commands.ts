/** Operator commands in the wire shape the mirror accepts. */

export type OperatorCommand =
  | { type: "set_autonomy"; level: string | number }
  | { type: "confirm_transition"; state?: string }
  | { type: "force_transition"; outcome: string; state?: string }
  | { type: "preempt" }
  | { type: "goal"; pose: [number, number, number] }
  | { type: "end_goals" };

export const AUTONOMY_LEVELS = ["off", "low", "high", "full"] as const;

export function setAutonomy(level: string | number): OperatorCommand {
  return { type: "set_autonomy", level };
}

export function preempt(): OperatorCommand {
  return { type: "preempt" };
}

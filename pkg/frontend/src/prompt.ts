/** Decision prompt: the operator choice offered while a transition blocks.
 *
 * The blocked state's declared outcomes become buttons. Choosing the
 * pending outcome confirms it; any other declared outcome is forced.
 * Exactly one command goes out per prompt; the prompt stays visible but
 * inert until the matching ack or until the stream resolves the block.
 */

import type { MirrorState, PendingBlock } from "./events.js";
import type { OperatorCommand } from "./commands.js";

export interface Prompt {
  state: string;
  path: string;
  pendingOutcome: string;
  requiredLevel: number;
  choices: string[];
}

export function promptFrom(block: PendingBlock | null): Prompt | null {
  if (!block) {
    return null;
  }
  const declared = block.outcomes ?? [block.outcome];
  return {
    state: block.state,
    path: block.path,
    pendingOutcome: block.outcome,
    requiredLevel: block.required_level,
    choices: [...declared],
  };
}

export function commandFor(prompt: Prompt, choice: string): OperatorCommand {
  if (!prompt.choices.includes(choice)) {
    throw new Error(`${choice} is not a declared outcome of ${prompt.state}`);
  }
  if (choice === prompt.pendingOutcome) {
    return { type: "confirm_transition", state: prompt.state };
  }
  return { type: "force_transition", outcome: choice, state: prompt.state };
}

/** One-command-per-prompt bookkeeping plus dismissal. */
export class PromptTracker {
  private sentFor: string | null = null;
  private ackSeen = false;

  /** The prompt to render, or null when there is nothing to ask. */
  current(state: MirrorState): Prompt | null {
    const prompt = promptFrom(state.pendingBlock);
    if (!prompt) {
      // organic resolution (outcome, autonomy raise, behavior end)
      this.sentFor = null;
      this.ackSeen = false;
      return null;
    }
    return prompt;
  }

  /** Whether the buttons should accept a click. */
  canSend(prompt: Prompt): boolean {
    return this.sentFor !== prompt.path && !this.ackSeen;
  }

  /** Record the single outgoing command for this prompt. */
  markSent(prompt: Prompt): void {
    this.sentFor = prompt.path;
  }

  /** Feed acks from the stream; the matching ack dismisses the prompt. */
  sawAck(ack: Record<string, unknown>): void {
    if (this.sentFor !== null && ack["applied"] === true) {
      this.ackSeen = true;
    }
  }

  dismissed(): boolean {
    return this.ackSeen;
  }
}

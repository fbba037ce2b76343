/** End to end: the console against a live run.
 *
 * Spawns the real CLI with a gated manifest, connects over the mirror
 * websocket, and drives the blocked decision from here: "canceled" at the
 * first prompt must put the machine back in GetGoal within two engine
 * periods, measured on the executive's own clock.
 */

import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { fileURLToPath } from "node:url";
import { join } from "node:path";
import { afterEach, describe, expect, it } from "vitest";
import { WebSocket } from "ws";

import { MirrorClient, type SocketLike } from "../src/client.js";
import type { MirrorEvent } from "../src/events.js";
import { PromptTracker, commandFor } from "../src/prompt.js";
import { fetchWorld } from "../src/world.js";

const REPO = fileURLToPath(new URL("../..", import.meta.url));
const PERIOD_MS = 20; // engine period in demo/courier.toml

const wsFactory = (url: string): SocketLike =>
  new WebSocket(url) as unknown as SocketLike;

let child: ChildProcessWithoutNullStreams | null = null;
let client: MirrorClient | null = null;
let scratch: string | null = null;

afterEach(() => {
  client?.close();
  client = null;
  if (child && child.exitCode === null) {
    child.kill("SIGKILL");
  }
  child = null;
  if (scratch) {
    rmSync(scratch, { recursive: true, force: true });
    scratch = null;
  }
});

async function waitFor(check: () => boolean, what: string, ms = 20000): Promise<void> {
  const deadline = Date.now() + ms;
  while (!check()) {
    if (Date.now() > deadline) {
      throw new Error(`timed out waiting for ${what}`);
    }
    await new Promise((r) => setTimeout(r, 10));
  }
}

describe("operator console against a live run", () => {
  it("cancels a blocked plan and lands back in GetGoal within two periods", async () => {
    scratch = mkdtempSync(join(tmpdir(), "console-e2e-"));
    const script = join(scratch, "goals.cmds");
    writeFileSync(script, "0 goal 18 1\n0 goal 2 3\n0 end_goals\n");

    const env: Record<string, string> = { PYTHONUNBUFFERED: "1" };
    for (const [key, value] of Object.entries(process.env)) {
      if (value !== undefined && !key.startsWith("HFSMBT_")) {
        env[key] = value;
      }
    }
    child = spawn(
      "python3",
      [
        "-m",
        "hfsmbt.cli",
        "run",
        "demo/courier.toml",
        "--script",
        script,
        "--bt-port",
        "0",
        "--mirror-port",
        "0",
      ],
      { cwd: REPO, env },
    );
    let stdout = "";
    let stderr = "";
    child.stdout.on("data", (chunk) => (stdout += String(chunk)));
    child.stderr.on("data", (chunk) => (stderr += String(chunk)));
    let exitCode: number | null = null;
    child.on("exit", (code) => (exitCode = code));

    await waitFor(() => /mirror on ws:\/\/\S+\/mirror/.test(stdout), "mirror address");
    const wsUrl = /mirror on (ws:\/\/\S+\/mirror)/.exec(stdout)![1]!;
    const host = new URL(wsUrl).host;

    const world = await fetchWorld(`http://${host}`);
    expect(world).not.toBeNull();
    expect(world!.width).toBe(20);
    expect(world!.height).toBe(6);
    expect(world!.static_obstacles.length).toBeGreaterThan(0);
    expect(world!.robot_pose).not.toBeNull();

    const events: MirrorEvent[] = [];
    const tracker = new PromptTracker();
    let promptDismissed = false;
    client = new MirrorClient(wsUrl, {
      socketFactory: wsFactory,
      reconnectDelayMs: 100,
      onSnapshot: (snapshot) => events.splice(0, events.length, ...snapshot),
      onChange: (state, event) => {
        if (event) {
          events.push(event);
          if (event.kind === "command_ack") {
            tracker.sawAck(event.data);
            promptDismissed ||= tracker.dismissed();
          }
        }
        tracker.current(state); // the render loop polls the prompt each change
      },
    });
    client.connect();

    // first delivery: the planned route blocks for sign-off
    await waitFor(
      () => client!.state.pendingBlock?.state === "Plan",
      "first blocked plan",
    );
    const block = client.state.pendingBlock!;
    expect(block.outcome).toBe("done");
    expect(block.outcomes).toEqual(["canceled", "done", "failed"]);

    const prompt = tracker.current(client.state)!;
    expect(tracker.canSend(prompt)).toBe(true);
    const command = commandFor(prompt, "canceled");
    expect(command).toEqual({
      type: "force_transition",
      outcome: "canceled",
      state: "Plan",
    });
    client.send(command);
    tracker.markSent(prompt);
    expect(tracker.canSend(prompt)).toBe(false);

    const ackOf = (kind: string) =>
      events.find(
        (e) =>
          e.kind === "command_ack" &&
          e.data["command"] === kind &&
          e.data["applied"] === true,
      );
    await waitFor(() => ackOf("force_transition") !== undefined, "force ack");
    const ack = ackOf("force_transition")!;
    expect(promptDismissed).toBe(true);

    await waitFor(
      () =>
        events.some(
          (e) =>
            e.kind === "state_entered" &&
            e.data["state"] === "GetGoal" &&
            e.seq > ack.seq,
        ),
      "GetGoal after the cancel",
    );
    const reentry = events.find(
      (e) =>
        e.kind === "state_entered" &&
        e.data["state"] === "GetGoal" &&
        e.seq > ack.seq,
    )!;
    expect(reentry.t_ms - ack.t_ms).toBeLessThanOrEqual(2 * PERIOD_MS);

    const forced = events.find(
      (e) =>
        e.kind === "outcome_emitted" &&
        e.data["state"] === "Plan" &&
        e.seq > ack.seq - 2 &&
        e.seq < reentry.seq,
    )!;
    expect(forced.data["outcome"]).toBe("canceled");
    expect(forced.data["forced"]).toBe(true);

    // second delivery blocks in turn; confirm it and let the run finish
    await waitFor(
      () =>
        client!.state.pendingBlock?.state === "Plan" &&
        client!.state.lastSeq > reentry.seq,
      "second blocked plan",
    );
    const second = tracker.current(client.state)!;
    expect(tracker.canSend(second)).toBe(true);
    client.send(commandFor(second, "done"));
    tracker.markSent(second);

    await waitFor(() => exitCode !== null, "run to finish", 40000);
    expect(exitCode, stderr).toBe(0);
    expect(stdout).toContain("courier: done after");
    expect(client.state.forcedCount).toBe(1);
    expect(client.state.blockedCount).toBe(2);
  });
});

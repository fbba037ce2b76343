/** Browser entry point: wires the mirror client to the page.
 *
 * Everything shown here is derived from the event stream (plus the static
 * world geometry fetched once over HTTP); no state of its own beyond what
 * replay() reconstructs.
 */

import { MirrorClient, type ConnectionStatus } from "./client.js";
import type { MirrorEvent, MirrorState } from "./events.js";
import { initialState } from "./events.js";
import { AUTONOMY_LEVELS, preempt, setAutonomy } from "./commands.js";
import { PromptTracker, commandFor } from "./prompt.js";
import { timelineOf } from "./timeline.js";
import { fetchWorld, type WorldGeometry } from "./world.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

const params = new URLSearchParams(location.search);
const target = params.get("mirror") ?? location.host;

const statusEl = byId<HTMLSpanElement>("status");
const pathEl = byId<HTMLDivElement>("active-path");
const nodesEl = byId<HTMLDivElement>("active-nodes");
const clockEl = byId<HTMLSpanElement>("clock");
const countsEl = byId<HTMLSpanElement>("counts");
const outcomeEl = byId<HTMLDivElement>("finished");
const promptEl = byId<HTMLDivElement>("prompt");
const timelineEl = byId<HTMLOListElement>("timeline");
const errorsEl = byId<HTMLDivElement>("errors");
const autonomyEl = byId<HTMLSelectElement>("autonomy");
const preemptEl = byId<HTMLButtonElement>("preempt");
const canvas = byId<HTMLCanvasElement>("world");

for (const level of AUTONOMY_LEVELS) {
  const option = document.createElement("option");
  option.value = level;
  option.textContent = level;
  autonomyEl.appendChild(option);
}

let world: WorldGeometry | null = null;
let events: MirrorEvent[] = [];
let lastState: MirrorState = initialState();
const trail: { x: number; y: number }[] = [];
const tracker = new PromptTracker();

const client = new MirrorClient(`ws://${target}/mirror`, {
  onSnapshot: (snapshot) => {
    events = [...snapshot];
    trail.length = 0;
  },
  onChange: (state, event) => {
    if (event !== null) {
      events.push(event);
      if (event.kind === "command_ack") {
        tracker.sawAck(event.data);
      }
    }
    lastState = state;
    if (state.robotPose) {
      trail.push({ x: state.robotPose.x, y: state.robotPose.y });
    }
    render(state);
  },
  onConnection: (status) => renderStatus(status),
  onServerError: (detail) => {
    errorsEl.textContent = detail;
  },
});

function renderStatus(status: ConnectionStatus): void {
  statusEl.textContent = status;
  statusEl.className = `badge ${status}`;
  const live = status === "open";
  autonomyEl.disabled = !live;
  preemptEl.disabled = !live;
}

function render(state: MirrorState): void {
  pathEl.textContent = state.activeStates.length
    ? state.activeStates.join(" / ")
    : "(idle)";
  nodesEl.textContent = state.activeNodes.length ? state.activeNodes.join(", ") : "-";
  clockEl.textContent = state.elapsedMs === null ? "-" : `${state.elapsedMs} ms`;
  countsEl.textContent =
    `${state.outcomes.length} outcomes, ${state.blockedCount} blocked, ` +
    `${state.forcedCount} forced`;
  outcomeEl.textContent = state.finishedOutcome ? `finished: ${state.finishedOutcome}` : "";
  if (state.autonomy !== null) {
    const name = AUTONOMY_LEVELS[state.autonomy];
    if (name !== undefined && autonomyEl.value !== name) {
      autonomyEl.value = name;
    }
  }
  renderPrompt(state);
  renderTimeline();
  drawWorld(state);
}

function renderPrompt(state: MirrorState): void {
  const prompt = tracker.current(state);
  promptEl.replaceChildren();
  if (prompt === null) {
    promptEl.classList.remove("armed");
    return;
  }
  promptEl.classList.add("armed");
  const label = document.createElement("div");
  label.textContent =
    `${prompt.path} wants "${prompt.pendingOutcome}" ` +
    `(needs autonomy >= ${prompt.requiredLevel})`;
  promptEl.appendChild(label);
  for (const choice of prompt.choices) {
    const button = document.createElement("button");
    button.textContent = choice === prompt.pendingOutcome ? `confirm ${choice}` : `force ${choice}`;
    button.disabled = !tracker.canSend(prompt);
    button.addEventListener("click", () => {
      if (!tracker.canSend(prompt)) return;
      client.send(commandFor(prompt, choice));
      tracker.markSent(prompt);
      render(lastState);
    });
    promptEl.appendChild(button);
  }
}

function renderTimeline(): void {
  const entries = timelineOf(events).slice(-12);
  timelineEl.replaceChildren();
  for (const entry of entries) {
    const item = document.createElement("li");
    const end = entry.exitedMs === null ? "..." : `${entry.exitedMs}`;
    item.textContent = `${entry.path}  [${entry.enteredMs} - ${end} ms]`;
    timelineEl.appendChild(item);
  }
}

function drawWorld(state: MirrorState): void {
  const ctx = canvas.getContext("2d");
  if (ctx === null) return;
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (world === null || world.width === 0) return;
  const px = Math.floor(
    Math.min(canvas.width / world.width, canvas.height / world.height),
  );
  const toX = (x: number) => (x / world!.cell_size) * px;
  const toY = (y: number) => (y / world!.cell_size) * px;
  ctx.fillStyle = "#1c2430";
  ctx.fillRect(0, 0, world.width * px, world.height * px);
  ctx.fillStyle = "#4a5568";
  for (const [c, r] of world.static_obstacles) {
    ctx.fillRect(c * px, r * px, px, px);
  }
  ctx.fillStyle = "#744210";
  for (const [c, r] of world.dynamic_obstacles) {
    ctx.fillRect(c * px, r * px, px, px);
  }
  ctx.strokeStyle = "#2d3748";
  ctx.lineWidth = 1;
  for (let c = 0; c <= world.width; c++) {
    ctx.beginPath();
    ctx.moveTo(c * px, 0);
    ctx.lineTo(c * px, world.height * px);
    ctx.stroke();
  }
  for (let r = 0; r <= world.height; r++) {
    ctx.beginPath();
    ctx.moveTo(0, r * px);
    ctx.lineTo(world.width * px, r * px);
    ctx.stroke();
  }
  ctx.fillStyle = "#38a169";
  for (const point of trail) {
    ctx.beginPath();
    ctx.arc(toX(point.x) + px / 2, toY(point.y) + px / 2, px / 6, 0, Math.PI * 2);
    ctx.fill();
  }
  const pose = state.robotPose;
  if (pose) {
    const cx = toX(pose.x) + px / 2;
    const cy = toY(pose.y) + px / 2;
    ctx.fillStyle = "#63b3ed";
    ctx.beginPath();
    ctx.arc(cx, cy, px / 2.5, 0, Math.PI * 2);
    ctx.fill();
    ctx.strokeStyle = "#bee3f8";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(cx + Math.cos(pose.heading) * px * 0.6, cy + Math.sin(pose.heading) * px * 0.6);
    ctx.stroke();
  }
}

autonomyEl.addEventListener("change", () => {
  client.send(setAutonomy(autonomyEl.value));
});

preemptEl.addEventListener("click", () => {
  client.send(preempt());
});

fetchWorld(`http://${target}`)
  .then((geometry) => {
    world = geometry;
    drawWorld(lastState);
  })
  .catch(() => {
    errorsEl.textContent = "world geometry unavailable";
  });

renderStatus(client.status);
client.connect();

/** WebSocket client for the run mirror.
 *
 * Connects, folds the snapshot frame into a fresh MirrorState, then applies
 * event frames one at a time. A sequence gap means this client missed an
 * event it can never recover from the stream, so it drops the connection and
 * reconnects; the new snapshot is authoritative. Connection loss likewise
 * reconnects after a short delay until close() is called.
 */

import {
  MirrorEvent,
  MirrorState,
  SeqGapError,
  applyEvent,
  eventFromWire,
  initialState,
  replay,
} from "./events.js";
import type { OperatorCommand } from "./commands.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface MirrorClientOptions {
  socketFactory?: SocketFactory;
  onChange?: (state: MirrorState, event: MirrorEvent | null) => void;
  onSnapshot?: (events: MirrorEvent[]) => void;
  onConnection?: (status: ConnectionStatus) => void;
  onServerError?: (detail: string) => void;
  reconnectDelayMs?: number;
}

const defaultFactory: SocketFactory = (url) => {
  const ctor = (globalThis as { WebSocket?: new (url: string) => SocketLike }).WebSocket;
  if (ctor === undefined) {
    throw new Error("no WebSocket implementation; pass a socketFactory");
  }
  return new ctor(url);
};

export class MirrorClient {
  readonly url: string;
  state: MirrorState = initialState();
  status: ConnectionStatus = "closed";
  /** Counts completed (re)connections, i.e. snapshots received. */
  snapshots = 0;

  private readonly factory: SocketFactory;
  private readonly onChange: (state: MirrorState, event: MirrorEvent | null) => void;
  private readonly onSnapshot: (events: MirrorEvent[]) => void;
  private readonly onConnection: (status: ConnectionStatus) => void;
  private readonly onServerError: (detail: string) => void;
  private readonly reconnectDelayMs: number;
  private socket: SocketLike | null = null;
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(url: string, opts: MirrorClientOptions = {}) {
    this.url = url;
    this.factory = opts.socketFactory ?? defaultFactory;
    this.onChange = opts.onChange ?? (() => {});
    this.onSnapshot = opts.onSnapshot ?? (() => {});
    this.onConnection = opts.onConnection ?? (() => {});
    this.onServerError = opts.onServerError ?? (() => {});
    this.reconnectDelayMs = opts.reconnectDelayMs ?? 250;
  }

  connect(): void {
    this.stopped = false;
    this.open();
  }

  /** Stops the client for good; no further reconnect attempts. */
  close(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    const socket = this.socket;
    this.socket = null;
    if (socket !== null) {
      socket.onclose = null;
      try {
        socket.close();
      } catch {
        // already closed
      }
    }
    this.setStatus("closed");
  }

  send(command: OperatorCommand): void {
    if (this.socket === null || this.status !== "open") {
      throw new Error("mirror connection is not open");
    }
    this.socket.send(JSON.stringify(command));
  }

  private open(): void {
    this.setStatus("connecting");
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      if (socket !== this.socket) return;
      this.setStatus("open");
    };
    socket.onmessage = (ev) => {
      if (socket !== this.socket) return;
      this.handleFrame(String(ev.data));
    };
    socket.onclose = () => {
      if (socket !== this.socket) return;
      this.socket = null;
      this.setStatus("closed");
      this.scheduleReconnect();
    };
    socket.onerror = () => {
      // the close event that follows drives the reconnect
    };
  }

  private handleFrame(raw: string): void {
    let frame: { type?: string; events?: unknown[]; event?: unknown; detail?: unknown };
    try {
      frame = JSON.parse(raw);
    } catch {
      return;
    }
    if (frame.type === "snapshot" && Array.isArray(frame.events)) {
      const events = frame.events.map(eventFromWire);
      this.state = replay(events);
      this.snapshots += 1;
      this.onSnapshot(events);
      this.onChange(this.state, null);
      return;
    }
    if (frame.type === "event" && frame.event !== undefined) {
      const event = eventFromWire(frame.event);
      try {
        this.state = applyEvent(this.state, event);
      } catch (err) {
        if (err instanceof SeqGapError) {
          this.resync();
          return;
        }
        throw err;
      }
      this.onChange(this.state, event);
      return;
    }
    if (frame.type === "error") {
      this.onServerError(String(frame.detail ?? "unknown error"));
    }
  }

  /** Drops the current connection so the next snapshot restores integrity. */
  private resync(): void {
    const socket = this.socket;
    this.socket = null;
    if (socket !== null) {
      socket.onclose = null;
      try {
        socket.close();
      } catch {
        // already closed
      }
    }
    this.setStatus("closed");
    this.scheduleReconnect();
  }

  private scheduleReconnect(): void {
    if (this.stopped || this.timer !== null) return;
    this.timer = setTimeout(() => {
      this.timer = null;
      if (!this.stopped) this.open();
    }, this.reconnectDelayMs);
  }

  private setStatus(status: ConnectionStatus): void {
    if (status === this.status) return;
    this.status = status;
    this.onConnection(status);
  }
}

// Session client: WebSocket wiring and the server-authoritative view state.
// The client performs no game logic; it renders what the server says.

import { SnapshotBuffer } from "./interpolation.js";
import type { Joined, ServerMessage, TrialComplete } from "./protocol.js";
import { encodeClientMessage, parseServerMessage } from "./protocol.js";

export const STALE_SNAPSHOT_MS = 250;

export type Status =
  | "connecting"
  | "joined"
  | "trial_running"
  | "trial_done"
  | "session_done"
  | "disconnected";

export class SessionClient {
  status: Status = "connecting";
  joined: Joined | null = null;
  lastError = "";
  lastSummary: TrialComplete["summary"] | null = null;
  readonly buffer = new SnapshotBuffer();
  onchange: () => void = () => {};

  constructor(private socket: WebSocket, private now: () => number = Date.now) {
    socket.onopen = () => {
      socket.send(encodeClientMessage({ type: "join" }));
    };
    socket.onmessage = (ev) => this.handle(String(ev.data));
    socket.onclose = () => {
      this.status = "disconnected";
      this.onchange();
    };
  }

  handle(raw: string): void {
    const msg: ServerMessage | null = parseServerMessage(raw);
    if (msg === null) return; // malformed or wrong version: ignore
    switch (msg.type) {
      case "joined":
        this.joined = msg;
        this.status = "joined";
        break;
      case "trial_started":
        this.status = "trial_running";
        break;
      case "snapshot":
        this.buffer.push(msg, this.now());
        break;
      case "trial_complete":
        this.lastSummary = msg.summary;
        this.status = "trial_done";
        break;
      case "session_complete":
        this.status = "session_done";
        break;
      case "error":
        this.lastError = `${msg.code}: ${msg.message}`;
        break;
    }
    this.onchange();
  }

  startTrial(): void {
    this.socket.send(encodeClientMessage({ type: "start_trial" }));
  }

  snapshotAge(): number {
    return this.buffer.ageMs(this.now());
  }

  degraded(): boolean {
    return this.status === "trial_running"
      && this.snapshotAge() > STALE_SNAPSHOT_MS;
  }
}

// Wire protocol (v1): JSON text frames over the session WebSocket.
// Every message carries a mandatory version field.

export const PROTOCOL_VERSION = 1;

export interface Snapshot {
  type: "snapshot";
  seq: number;
  t: number;
  bowl: [number, number, number];
  ball: [number, number];
  in_bowl: boolean;
  lifted: boolean;
  eligible: boolean;
  flags: [number, number][];
  collected: number;
  time_left: number;
  trial: number;
  set: number;
  distribution: string;
}

export interface Joined {
  type: "joined";
  subject: string;
  group: string;
  trials: number;
  snapshot_rate: number;
  time_limit: number;
  workspace: { x_min: number; x_max: number; y_min: number; y_max: number };
  table_height: number;
  next_trial: number;
}

export interface TrialStarted {
  type: "trial_started";
  trial: number;
  set: number;
  distribution: string;
  loading_level: number;
}

export interface TrialComplete {
  type: "trial_complete";
  summary: {
    trial: number;
    set: number;
    distribution: string;
    loading_level: number;
    flags_collected: number;
    task_time: number;
    duration: number;
    valid: boolean;
    drift: number;
  };
}

export interface ServerError {
  type: "error";
  code: string;
  message: string;
}

export interface SessionComplete {
  type: "session_complete";
}

export type ServerMessage =
  | Snapshot
  | Joined
  | TrialStarted
  | TrialComplete
  | ServerError
  | SessionComplete;

export type ClientMessage =
  | { type: "join" }
  | { type: "start_trial" }
  | { type: "input"; px: number; py: number; lift: boolean }
  | { type: "rest" };

const SERVER_TYPES = new Set([
  "snapshot",
  "joined",
  "trial_started",
  "trial_complete",
  "error",
  "session_complete",
]);

/** Parse one incoming frame; returns null for anything malformed or from a
 *  different protocol version. */
export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as Record<string, unknown>;
  if (msg.v !== PROTOCOL_VERSION) return null;
  if (typeof msg.type !== "string" || !SERVER_TYPES.has(msg.type)) return null;
  return msg as unknown as ServerMessage;
}

export function encodeClientMessage(msg: ClientMessage): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, ...msg });
}

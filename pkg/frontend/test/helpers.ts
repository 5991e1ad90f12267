import type { Snapshot } from "../src/protocol.js";

export function snap(partial: Partial<Snapshot> = {}): Snapshot {
  return {
    type: "snapshot",
    seq: 1,
    t: 0.0,
    bowl: [0, 0, 0.05],
    ball: [0, 0],
    in_bowl: true,
    lifted: true,
    eligible: true,
    flags: [
      [0.1, 0.1],
      [-0.1, 0.05],
    ],
    collected: 0,
    time_left: 20,
    trial: 1,
    set: 1,
    distribution: "B",
    ...partial,
  };
}

// Two-snapshot interpolation buffer. Continuous quantities (bowl position,
// ball deflection) are blended by simulation time for smooth drawing;
// discrete game state (flags, colors, counters) always comes from the
// latest snapshot so rule changes appear exactly when the server says so.
// Rendering never extrapolates beyond the latest snapshot.

import type { Snapshot } from "./protocol.js";

export interface InterpolatedView {
  bowl: [number, number, number];
  ball: [number, number];
  latest: Snapshot;
}

export class SnapshotBuffer {
  private prev: Snapshot | null = null;
  private last: Snapshot | null = null;
  private lastArrivalMs = 0;

  push(snap: Snapshot, nowMs: number): void {
    // ignore stale or duplicate sequence numbers
    if (this.last !== null && snap.seq <= this.last.seq) return;
    this.prev = this.last;
    this.last = snap;
    this.lastArrivalMs = nowMs;
  }

  get latest(): Snapshot | null {
    return this.last;
  }

  /** Milliseconds since the newest snapshot arrived. */
  ageMs(nowMs: number): number {
    return this.last === null ? Infinity : nowMs - this.lastArrivalMs;
  }

  /**
   * View for drawing at `nowMs`: the interpolant runs one snapshot interval
   * behind the newest sample and is clamped at it (alpha in [0, 1]).
   */
  view(nowMs: number, snapshotIntervalMs: number): InterpolatedView | null {
    if (this.last === null) return null;
    if (this.prev === null || this.prev.t >= this.last.t) {
      return { bowl: this.last.bowl, ball: this.last.ball, latest: this.last };
    }
    const sinceMs = nowMs - this.lastArrivalMs;
    // progress through the [prev, last] window, delayed by one interval
    const alpha = Math.min(Math.max(sinceMs / snapshotIntervalMs, 0), 1);
    const lerp = (a: number, b: number) => a + (b - a) * alpha;
    return {
      bowl: [
        lerp(this.prev.bowl[0], this.last.bowl[0]),
        lerp(this.prev.bowl[1], this.last.bowl[1]),
        lerp(this.prev.bowl[2], this.last.bowl[2]),
      ],
      ball: [
        lerp(this.prev.ball[0], this.last.ball[0]),
        lerp(this.prev.ball[1], this.last.ball[1]),
      ],
      latest: this.last,
    };
  }
}

import { describe, expect, it } from "vitest";
import { SnapshotBuffer } from "../src/interpolation.js";
import { snap } from "./helpers.js";

const INTERVAL = 1000 / 60;

describe("snapshot buffer", () => {
  it("interpolates continuous state between the two newest snapshots", () => {
    const buf = new SnapshotBuffer();
    buf.push(snap({ seq: 1, t: 0.0, bowl: [0, 0, 0] }), 1000);
    buf.push(snap({ seq: 2, t: 0.0167, bowl: [0.1, 0.2, 0] }), 1000 + INTERVAL);
    const mid = buf.view(1000 + INTERVAL + INTERVAL / 2, INTERVAL)!;
    expect(mid.bowl[0]).toBeCloseTo(0.05, 9);
    expect(mid.bowl[1]).toBeCloseTo(0.1, 9);
  });

  it("never extrapolates beyond the latest snapshot", () => {
    const buf = new SnapshotBuffer();
    buf.push(snap({ seq: 1, t: 0.0, bowl: [0, 0, 0] }), 1000);
    buf.push(snap({ seq: 2, t: 0.0167, bowl: [0.1, 0, 0] }), 1000 + INTERVAL);
    const far = buf.view(1000 + 10 * INTERVAL, INTERVAL)!;
    expect(far.bowl[0]).toBe(0.1); // clamped at the newest sample
  });

  it("serves discrete state from the latest snapshot only", () => {
    const buf = new SnapshotBuffer();
    buf.push(snap({ seq: 1, eligible: false, collected: 0 }), 1000);
    buf.push(snap({ seq: 2, eligible: true, collected: 3 }), 1000 + INTERVAL);
    const v = buf.view(1000 + INTERVAL, INTERVAL)!;
    expect(v.latest.eligible).toBe(true);
    expect(v.latest.collected).toBe(3);
  });

  it("drops stale or duplicate sequence numbers", () => {
    const buf = new SnapshotBuffer();
    buf.push(snap({ seq: 5, bowl: [1, 1, 0] }), 1000);
    buf.push(snap({ seq: 4, bowl: [9, 9, 9] }), 1001);
    buf.push(snap({ seq: 5, bowl: [8, 8, 8] }), 1002);
    expect(buf.latest!.bowl[0]).toBe(1);
  });

  it("reports snapshot age", () => {
    const buf = new SnapshotBuffer();
    expect(buf.ageMs(500)).toBe(Infinity);
    buf.push(snap(), 1000);
    expect(buf.ageMs(1300)).toBe(300);
  });
});

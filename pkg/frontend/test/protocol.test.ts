import { describe, expect, it } from "vitest";
import {
  encodeClientMessage,
  parseServerMessage,
  PROTOCOL_VERSION,
} from "../src/protocol.js";

describe("wire protocol", () => {
  it("parses a versioned snapshot", () => {
    const raw = JSON.stringify({
      v: 1, type: "snapshot", seq: 3, t: 0.5, bowl: [0, 0, 0], ball: [0, 0],
      in_bowl: true, lifted: false, eligible: false, flags: [],
      collected: 0, time_left: 19.5, trial: 1, set: 1, distribution: "B",
    });
    const msg = parseServerMessage(raw);
    expect(msg).not.toBeNull();
    expect(msg!.type).toBe("snapshot");
  });

  it("rejects the wrong version, bad json, unknown types", () => {
    expect(parseServerMessage(JSON.stringify({ v: 2, type: "snapshot" })))
      .toBeNull();
    expect(parseServerMessage(JSON.stringify({ type: "snapshot" }))).toBeNull();
    expect(parseServerMessage("{oops")).toBeNull();
    expect(parseServerMessage(JSON.stringify({ v: 1, type: "warp" })))
      .toBeNull();
    expect(parseServerMessage("42")).toBeNull();
  });

  it("stamps outgoing messages with the protocol version", () => {
    const text = encodeClientMessage({ type: "input", px: 0.1, py: -0.2, lift: true });
    const parsed = JSON.parse(text);
    expect(parsed.v).toBe(PROTOCOL_VERSION);
    expect(parsed.type).toBe("input");
    expect(parsed.lift).toBe(true);
  });
});

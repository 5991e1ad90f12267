import { describe, expect, it } from "vitest";
import { InputChannel } from "../src/input.js";

class FakeSender {
  open = true;
  sent: string[] = [];
  send(text: string): void {
    this.sent.push(text);
  }
}

describe("input channel", () => {
  it("rejects input before the session is joined", () => {
    const sender = new FakeSender();
    const ch = new InputChannel(sender);
    expect(ch.sendInput(0, 0, false)).toBe(false);
    expect(sender.sent).toHaveLength(0);
  });

  it("sends immediately while connected", () => {
    const sender = new FakeSender();
    const ch = new InputChannel(sender);
    ch.joined = true;
    expect(ch.sendInput(0.1, 0.2, true)).toBe(true);
    expect(sender.sent).toHaveLength(1);
    expect(JSON.parse(sender.sent[0]).px).toBe(0.1);
  });

  it("buffers while disconnected and drops entries older than one second", () => {
    let clock = 0;
    const sender = new FakeSender();
    sender.open = false;
    const ch = new InputChannel(sender, () => clock);
    ch.joined = true;
    ch.sendInput(1, 1, false);
    clock = 500;
    ch.sendInput(2, 2, false);
    expect(ch.buffered).toBe(2);
    clock = 1400; // first entry is now stale
    expect(ch.buffered).toBe(1);
    sender.open = true;
    ch.flush();
    expect(sender.sent).toHaveLength(1);
    expect(JSON.parse(sender.sent[0]).px).toBe(2);
    expect(ch.buffered).toBe(0);
  });
});

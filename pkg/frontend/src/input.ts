// Pointer + lift-toggle input, sent at a fixed rate while a session is
// joined. While the transport is down, messages buffer for at most one
// second and are then dropped.

import { encodeClientMessage } from "./protocol.js";

export interface Sender {
  readonly open: boolean;
  send(text: string): void;
}

export const INPUT_RATE_HZ = 60;
export const BUFFER_MAX_MS = 1000;

export class InputChannel {
  joined = false;
  private buffer: { atMs: number; text: string }[] = [];

  constructor(private sender: Sender, private now: () => number = Date.now) {}

  /** Queue or send one input sample; returns false when rejected locally. */
  sendInput(px: number, py: number, lift: boolean): boolean {
    if (!this.joined) return false;
    this.dispatch(encodeClientMessage({ type: "input", px, py, lift }));
    return true;
  }

  sendRest(): boolean {
    if (!this.joined) return false;
    this.dispatch(encodeClientMessage({ type: "rest" }));
    return true;
  }

  private dispatch(text: string): void {
    this.prune();
    if (this.sender.open) {
      this.flush();
      this.sender.send(text);
    } else {
      this.buffer.push({ atMs: this.now(), text });
    }
  }

  /** Send everything still fresh once the transport is open again. */
  flush(): void {
    this.prune();
    if (!this.sender.open) return;
    for (const item of this.buffer) this.sender.send(item.text);
    this.buffer = [];
  }

  private prune(): void {
    const cutoff = this.now() - BUFFER_MAX_MS;
    this.buffer = this.buffer.filter((b) => b.atMs >= cutoff);
  }

  get buffered(): number {
    this.prune();
    return this.buffer.length;
  }
}

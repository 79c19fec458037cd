import type { ClientMessage, Gesture } from "./protocol.js";
import { classification } from "./protocol.js";

export const CADENCE_MS = 50;

export const DEFAULT_BINDINGS: Record<string, Gesture> = {
  KeyJ: "HO",
  KeyK: "HC",
  KeyL: "WF",
  Semicolon: "WE",
};

/// Keyboard proxy for the EMG classifier: held keys are sampled on a fixed
/// cadence, so the message rate does not depend on OS key repeat.
export class GestureInput {
  private held: string[] = [];
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private send: (m: ClientMessage) => void,
    public bindings: Record<string, Gesture> = { ...DEFAULT_BINDINGS },
  ) {}

  keyDown(code: string, repeat = false): boolean {
    if (!(code in this.bindings)) return false;
    if (!repeat && !this.held.includes(code)) this.held.push(code);
    return true;
  }

  keyUp(code: string): void {
    this.held = this.held.filter((c) => c !== code);
  }

  releaseAll(): void {
    this.held = [];
  }

  /// Most recently pressed held key wins.
  current(): Gesture {
    const code = this.held[this.held.length - 1];
    return code === undefined ? "NM" : this.bindings[code];
  }

  tick(): void {
    this.send(classification(this.current()));
  }

  start(): void {
    if (this.timer === null) this.timer = setInterval(() => this.tick(), CADENCE_MS);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }
}

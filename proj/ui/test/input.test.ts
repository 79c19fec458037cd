import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { CADENCE_MS, GestureInput } from "../src/input.js";
import type { ClientMessage } from "../src/protocol.js";

describe("GestureInput", () => {
  let sent: ClientMessage[];
  let input: GestureInput;
  beforeEach(() => {
    vi.useFakeTimers();
    sent = [];
    input = new GestureInput((m) => sent.push(m));
  });
  afterEach(() => {
    input.stop();
    vi.useRealTimers();
  });
  const gestures = () => sent.map((m) => ("gesture" in m ? m.gesture : "?"));

  it("holding WF for 200 ms sends 4 WF messages", () => {
    input.start();
    input.keyDown("KeyL");
    vi.advanceTimersByTime(200);
    input.keyUp("KeyL");
    expect(gestures()).toEqual(["WF", "WF", "WF", "WF"]);
  });

  it("sends NM with no key held", () => {
    input.start();
    vi.advanceTimersByTime(150);
    expect(gestures()).toEqual(["NM", "NM", "NM"]);
  });

  it("key repeat does not raise the rate", () => {
    input.start();
    input.keyDown("KeyJ");
    for (let t = 0; t < 500; t += 5) {
      input.keyDown("KeyJ", true);
      vi.advanceTimersByTime(5);
    }
    expect(sent.length).toBe(500 / CADENCE_MS);
    expect(new Set(gestures())).toEqual(new Set(["HO"]));
  });

  it("ignores unbound keys", () => {
    expect(input.keyDown("KeyQ")).toBe(false);
    expect(input.current()).toBe("NM");
  });

  it("latest held key wins and release falls back", () => {
    input.keyDown("KeyL");
    input.keyDown("KeyK");
    expect(input.current()).toBe("HC");
    input.keyUp("KeyK");
    expect(input.current()).toBe("WF");
    input.releaseAll();
    expect(input.current()).toBe("NM");
  });
});

import { describe, expect, it } from "vitest";
import { classification, control, hello, parseServerMessage } from "../src/protocol.js";
import { snapshot } from "./fixtures.js";

describe("parseServerMessage", () => {
  it("accepts a well-formed snapshot", () => {
    const r = parseServerMessage(JSON.stringify(snapshot()));
    expect(r.ok).toBe(true);
  });

  it("names the bad field", () => {
    const s: any = snapshot();
    s.arm = s.arm.slice(0, 3);
    const r = parseServerMessage(JSON.stringify(s));
    expect(r).toEqual({ ok: false, error: "snapshot: bad arm" });
  });

  it("rejects non-json, unknown types and other versions", () => {
    expect(parseServerMessage("{").ok).toBe(false);
    expect(parseServerMessage('{"type":"weather"}').ok).toBe(false);
    expect(parseServerMessage('{"type":"hello","protocol":"prosim","version":2}').ok).toBe(false);
    expect(parseServerMessage('{"type":"hello","protocol":"prosim","version":1}').ok).toBe(true);
  });

  it("allows a null marker and gaze", () => {
    const r = parseServerMessage(JSON.stringify(snapshot({ marker: null, gaze: null })));
    expect(r.ok).toBe(true);
  });
});

describe("client messages", () => {
  it("builds the wire shapes", () => {
    expect(hello(7)).toEqual({ type: "hello", protocol: "prosim", version: 1, id: 7 });
    expect(classification("WF")).toEqual({ type: "classification", gesture: "WF" });
    expect(control("start", 3)).toEqual({ type: "control", action: "start", id: 3 });
  });
});

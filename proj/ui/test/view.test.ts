import { describe, expect, it } from "vitest";
import { COLORS, frameModel, initialView, STALE_MS, type ViewState } from "../src/view.js";
import { scene, snapshot } from "./fixtures.js";

function view(over: Partial<ViewState> = {}): ViewState {
  const v = initialView();
  v.camera.orbit(Math.PI, 0.7, 0.9, [0.35, 0, 0]);
  v.scene = scene();
  v.snapshot = snapshot();
  v.connection = "open";
  v.receivedAt = 1000;
  return Object.assign(v, over);
}

describe("frameModel", () => {
  it("draws three arm links from the per-link points", () => {
    expect(frameModel(view(), 1010).links).toHaveLength(3);
  });

  it("highlights the selection and switches color on lock", () => {
    const v = view();
    const unlocked = frameModel(v, 1010).blocks.find((b) => b.id === 1)!;
    expect(unlocked.outline).toBe(COLORS.highlight);
    v.snapshot = snapshot({ selection: { block: 1, locked: true } });
    const locked = frameModel(v, 1010).blocks.find((b) => b.id === 1)!;
    expect(locked.outline).toBe(COLORS.locked);
    expect(frameModel(v, 1010).blocks.find((b) => b.id === 2)!.outline).toBeNull();
  });

  it("shows the guard indicator from the status", () => {
    expect(frameModel(view(), 1010).guard).toBe(false);
    expect(frameModel(view({ snapshot: snapshot({ guard: "guard" }) }), 1010).guard).toBe(true);
  });

  it("timer zero shows the end banner", () => {
    expect(frameModel(view(), 1010).banner).toBeNull();
    const f = frameModel(view({ snapshot: snapshot({ timer_remaining: 0 }) }), 1010);
    expect(f.banner).toMatch(/Trial over/);
    expect(f.timer).toBe("0:00");
  });

  it("marker only in the place stage", () => {
    const marker = { point: [0.4, 0.05, 0] as [number, number, number], frozen: false };
    expect(frameModel(view({ snapshot: snapshot({ marker }) }), 1010).marker).toBeNull();
    const f = frameModel(view({ snapshot: snapshot({ marker, stage: "place" }) }), 1010);
    expect(f.marker).not.toBeNull();
  });

  it("warns when the snapshot is stale", () => {
    const v = view();
    expect(frameModel(v, 1000 + STALE_MS).stale).toBe(false);
    expect(frameModel(v, 1000 + STALE_MS + 1).stale).toBe(true);
    expect(frameModel(view({ connection: "closed" }), 1010).stale).toBe(true);
  });

  it("mode text is anchored above the hand", () => {
    const f = frameModel(view({ snapshot: snapshot({ mode_label: "x translation" }) }), 1010);
    expect(f.modeText?.text).toBe("x translation");
    expect(f.modeText?.at).not.toBeNull();
  });
});

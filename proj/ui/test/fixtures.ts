import type { SceneMessage, SnapshotMessage } from "../src/protocol.js";

export const scene = (): SceneMessage => ({
  type: "scene",
  head_offset: [0.05, 0.18, 0.3],
  mode_display_offset: [0, 0, 0.1],
  wall_height: 0.08,
  scene: {
    box_frame: { position: [0.35, 0, 0], orientation: [1, 0, 0, 0] },
    table_top: 0,
    target_radius: 0.02,
    partition_height: 0.1,
    floor: [0.25, 0.5],
  },
  blocks: [1, 2].map((id) => ({
    id,
    color: id === 1 ? ("red" as const) : ("blue" as const),
    number: id,
    diameter: 0.025,
    height: 0.025,
    target: [0.4, id * 0.05, 0] as [number, number, number],
  })),
  snapshot_rate: 60,
});

export const snapshot = (over: Partial<SnapshotMessage> = {}): SnapshotMessage => ({
  type: "snapshot",
  t: 1.0,
  trial: 0,
  method: "C",
  lifecycle: "running",
  stage: "pick",
  q: [0, 0, 0, 0.5, 0, 0, 0],
  hand: "open",
  shoulder: { position: [0, 0, 0.3], orientation: [1, 0, 0, 0] },
  arm: [
    [0, 0, 0.3],
    [0.1, 0, 0.2],
    [0.25, 0, 0.15],
    [0.3, 0, 0.1],
  ],
  hand_pose: { position: [0.3, 0, 0.1], orientation: [1, 0, 0, 0] },
  blocks: [
    { id: 1, color: "red", number: 1, position: [0.3, -0.05, 0.0125], orientation: [1, 0, 0, 0], phase: "resting", in_target: false },
    { id: 2, color: "blue", number: 2, position: [0.3, 0.05, 0.0125], orientation: [1, 0, 0, 0], phase: "resting", in_target: false },
  ],
  selection: { block: 1, locked: false },
  belief: [
    { block: 1, p: 0.7 },
    { block: 2, p: 0.3 },
  ],
  marker: null,
  mode_label: "",
  guard: "ok",
  plan_status: "",
  cues: [],
  timer_remaining: 42,
  gaze: null,
  ...over,
});

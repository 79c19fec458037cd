import type { SceneMessage, SnapshotMessage, TrialEndMessage, Vec3 } from "./protocol.js";
import { Camera } from "./camera.js";
import { add, rotate } from "./math.js";

export const STALE_MS = 250;
export const COLORS = {
  red: "#c8312b",
  blue: "#2b5fc8",
  highlight: "#f2c500",
  locked: "#18b04a",
  marker: "#202020",
  arm: "#707070",
};

export type Connection = "connecting" | "open" | "closed";

/// Everything the client knows, all of it copied from the server.
export interface ViewState {
  snapshot: SnapshotMessage | null;
  receivedAt: number;
  scene: SceneMessage | null;
  lastTrial: TrialEndMessage | null;
  connection: Connection;
  camera: Camera;
  firstPerson: boolean;
  lastError: string | null;
}

export const initialView = (): ViewState => ({
  snapshot: null,
  receivedAt: 0,
  scene: null,
  lastTrial: null,
  connection: "connecting",
  camera: new Camera(),
  firstPerson: false,
  lastError: null,
});

export type Pt = [number, number];

export interface BlockItem {
  id: number;
  center: Pt;
  radius: number;
  fill: string;
  label: string;
  outline: string | null;
}

export interface Frame {
  links: [Pt, Pt][];
  hand: { at: Pt; closed: boolean } | null;
  boxOutline: Pt[];
  partition: [Pt, Pt] | null;
  targets: { center: Pt; radius: number }[];
  blocks: BlockItem[];
  marker: { at: Pt; frozen: boolean } | null;
  modeText: { text: string; at: Pt | null } | null;
  timer: string;
  guard: boolean;
  planStatus: string;
  stale: boolean;
  banner: string | null;
  status: string;
}

const projectAll = (cam: Camera, pts: Vec3[]): (Pt | null)[] => pts.map((p) => cam.project(p));

function pixelRadius(cam: Camera, center: Vec3, r: number): number {
  const a = cam.project(center);
  const { right } = cam.basis();
  const b = cam.project(add(center, [right[0] * r, right[1] * r, right[2] * r]));
  return a && b ? Math.hypot(b[0] - a[0], b[1] - a[1]) : 0;
}

const formatTimer = (s: number): string => {
  const whole = Math.ceil(Math.max(0, s));
  return `${Math.floor(whole / 60)}:${String(whole % 60).padStart(2, "0")}`;
};

/// Pure mapping from view state to draw items.
export function frameModel(view: ViewState, now: number): Frame {
  const cam = view.camera;
  const s = view.snapshot;
  const scene = view.scene;
  const frame: Frame = {
    links: [],
    hand: null,
    boxOutline: [],
    partition: null,
    targets: [],
    blocks: [],
    marker: null,
    modeText: null,
    timer: "",
    guard: false,
    planStatus: "",
    stale: view.connection !== "open" || s === null || now - view.receivedAt > STALE_MS,
    banner: null,
    status: view.connection,
  };

  if (scene) {
    const box = scene.scene.box_frame;
    const [depth, width] = scene.scene.floor;
    const toWorld = (p: Vec3): Vec3 => add(box.position, rotate(box.orientation, p));
    const corners: Vec3[] = [
      [-depth / 2, -width / 2, 0],
      [depth / 2, -width / 2, 0],
      [depth / 2, width / 2, 0],
      [-depth / 2, width / 2, 0],
    ];
    const pts = projectAll(cam, corners.map(toWorld));
    if (pts.every((p) => p)) frame.boxOutline = pts as Pt[];
    const pa = cam.project(toWorld([0, -width / 2, scene.scene.partition_height]));
    const pb = cam.project(toWorld([0, width / 2, scene.scene.partition_height]));
    if (pa && pb) frame.partition = [pa, pb];
    for (const b of scene.blocks) {
      const c = cam.project(b.target);
      if (c) frame.targets.push({ center: c, radius: pixelRadius(cam, b.target, scene.scene.target_radius) });
    }
  }

  if (!s) return frame;

  const arm = projectAll(cam, s.arm);
  for (let i = 0; i + 1 < arm.length; ++i) {
    const a = arm[i];
    const b = arm[i + 1];
    if (a && b) frame.links.push([a, b]);
  }
  const hand = arm[arm.length - 1];
  if (hand) frame.hand = { at: hand, closed: s.hand === "closed" };

  const sizes = new Map(scene?.blocks.map((b) => [b.id, b.diameter / 2]) ?? []);
  for (const b of s.blocks) {
    const c = cam.project(b.position);
    if (!c) continue;
    let outline: string | null = null;
    if (s.selection.block === b.id) outline = s.selection.locked ? COLORS.locked : COLORS.highlight;
    frame.blocks.push({
      id: b.id,
      center: c,
      radius: pixelRadius(cam, b.position, sizes.get(b.id) ?? 0.0125),
      fill: COLORS[b.color],
      label: String(b.number),
      outline,
    });
  }
  // far blocks first
  const { forward } = cam.basis();
  const depthOf = (id: number) => {
    const p = s.blocks.find((b) => b.id === id)!.position;
    return (p[0] - cam.eye[0]) * forward[0] + (p[1] - cam.eye[1]) * forward[1] + (p[2] - cam.eye[2]) * forward[2];
  };
  frame.blocks.sort((a, b) => depthOf(b.id) - depthOf(a.id));

  if (s.stage === "place" && s.marker) {
    const m = cam.project(s.marker.point);
    if (m) frame.marker = { at: m, frozen: s.marker.frozen };
  }

  if (s.mode_label) {
    const anchor = scene ? cam.project(add(s.hand_pose.position, scene.mode_display_offset)) : null;
    frame.modeText = { text: s.mode_label, at: anchor };
  }
  frame.timer = formatTimer(s.timer_remaining);
  frame.guard = s.guard !== "ok";
  frame.planStatus = s.plan_status;
  if (s.timer_remaining <= 0 || s.lifecycle === "finished") {
    const t = view.lastTrial;
    frame.banner = t ? `Trial over: ${t.success_count}/${t.outcomes.length} transferred` : "Trial over";
  }
  return frame;
}

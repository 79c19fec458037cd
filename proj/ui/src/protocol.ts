// Wire format of the simulator's WebSocket endpoint: JSON text frames.

export const PROTOCOL = "prosim";
export const VERSION = 1;

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number]; // w, x, y, z

export const GESTURES = ["HO", "HC", "WF", "WE", "NM"] as const;
export type Gesture = (typeof GESTURES)[number];
export type Method = "A" | "B" | "C" | "D";
export type ControlAction = "start" | "stop" | "reset" | "pause" | "resume";

export interface Pose {
  position: Vec3;
  orientation: Quat;
}

export interface BlockState {
  id: number;
  color: "red" | "blue";
  number: number;
  position: Vec3;
  orientation: Quat;
  phase: "resting" | "attached" | "falling";
  in_target: boolean;
}

export interface Cue {
  kind: "contact_made" | "contact_lost";
  block: number;
  t: number;
}

export interface SnapshotMessage {
  type: "snapshot";
  t: number;
  trial: number;
  method: Method;
  lifecycle: "idle" | "running" | "paused" | "finished";
  stage: "pick" | "place";
  q: number[];
  hand: "open" | "closed";
  shoulder: Pose;
  arm: [Vec3, Vec3, Vec3, Vec3]; // shoulder, elbow, wrist, hand
  hand_pose: Pose;
  blocks: BlockState[];
  selection: { block: number | null; locked: boolean };
  belief: { block: number; p: number }[];
  marker: { point: Vec3; frozen: boolean } | null;
  mode_label: string;
  guard: string;
  plan_status: string;
  cues: Cue[];
  timer_remaining: number;
  gaze: { origin: Vec3; direction: Vec3 } | null;
}

export interface SceneMessage {
  type: "scene";
  head_offset: Vec3;
  mode_display_offset: Vec3;
  wall_height: number;
  scene: {
    box_frame: Pose;
    table_top: number;
    target_radius: number;
    partition_height: number;
    floor: [number, number]; // depth, width
  };
  blocks: { id: number; color: "red" | "blue"; number: number; diameter: number; height: number; target: Vec3 }[];
  snapshot_rate: number;
}

export interface TrialEndMessage {
  type: "trial_end";
  trial: number;
  method: Method;
  arrangement: number;
  reason: "complete" | "timeout" | "stopped";
  t: number;
  outcomes: string[];
  success_count: number;
  log: string;
}

export type ServerMessage =
  | { type: "hello"; protocol: string; version: number }
  | { type: "ack"; of: string; id?: number }
  | { type: "reject"; reason: string; id?: number }
  | SnapshotMessage
  | SceneMessage
  | TrialEndMessage;

export type ClientMessage =
  | { type: "hello"; protocol: string; version: number; id?: number }
  | { type: "classification" | "gesture"; gesture: Gesture; id?: number }
  | { type: "gaze"; origin: Vec3; direction: Vec3; id?: number }
  | { type: "shoulder"; position: Vec3; orientation: Quat; id?: number }
  | { type: "control"; action: ControlAction; id?: number }
  | { type: "method"; method: Method; id?: number };

export type Parsed = { ok: true; message: ServerMessage } | { ok: false; error: string };

const isNum = (v: unknown): v is number => typeof v === "number" && Number.isFinite(v);
const isVec = (v: unknown, n: number): boolean => Array.isArray(v) && v.length === n && v.every(isNum);
const isPose = (v: any): boolean => v != null && isVec(v.position, 3) && isVec(v.orientation, 4);

function snapshotError(m: any): string | null {
  if (!isNum(m.t) || m.t < 0) return "t";
  if (!isVec(m.q, 7)) return "q";
  if (!Array.isArray(m.arm) || m.arm.length !== 4 || !m.arm.every((p: unknown) => isVec(p, 3))) return "arm";
  if (!isPose(m.shoulder) || !isPose(m.hand_pose)) return "shoulder/hand_pose";
  if (!Array.isArray(m.blocks)) return "blocks";
  for (const b of m.blocks) if (!isNum(b.id) || !isVec(b.position, 3) || !isVec(b.orientation, 4)) return "blocks";
  if (m.selection == null || typeof m.selection.locked !== "boolean") return "selection";
  if (m.selection.block !== null && !isNum(m.selection.block)) return "selection";
  if (m.marker !== null && (m.marker == null || !isVec(m.marker.point, 3))) return "marker";
  if (typeof m.mode_label !== "string" || typeof m.plan_status !== "string") return "labels";
  if (!Array.isArray(m.cues)) return "cues";
  if (!isNum(m.timer_remaining)) return "timer_remaining";
  if (m.gaze !== null && (m.gaze == null || !isVec(m.gaze.origin, 3) || !isVec(m.gaze.direction, 3))) return "gaze";
  return null;
}

/// Checks the fields the UI relies on; unknown extra fields are allowed.
export function parseServerMessage(text: string): Parsed {
  let m: any;
  try {
    m = JSON.parse(text);
  } catch {
    return { ok: false, error: "not json" };
  }
  if (m == null || typeof m !== "object" || typeof m.type !== "string") return { ok: false, error: "no type" };
  switch (m.type) {
    case "hello":
      if (m.protocol !== PROTOCOL) return { ok: false, error: "wrong protocol" };
      if (m.version !== VERSION) return { ok: false, error: `protocol version ${m.version}` };
      break;
    case "ack":
      if (typeof m.of !== "string") return { ok: false, error: "ack without of" };
      break;
    case "reject":
      if (typeof m.reason !== "string") return { ok: false, error: "reject without reason" };
      break;
    case "snapshot": {
      const bad = snapshotError(m);
      if (bad) return { ok: false, error: `snapshot: bad ${bad}` };
      break;
    }
    case "scene":
      if (!isPose(m.scene?.box_frame) || !Array.isArray(m.blocks)) return { ok: false, error: "scene: bad layout" };
      break;
    case "trial_end":
      if (!Array.isArray(m.outcomes) || !isNum(m.success_count)) return { ok: false, error: "trial_end: bad outcomes" };
      break;
    default:
      return { ok: false, error: `unknown type ${m.type}` };
  }
  return { ok: true, message: m as ServerMessage };
}

let nextId = 1;
const withId = <T extends object>(m: T, id?: number): T & { id: number } => ({ ...m, id: id ?? nextId++ });

export const hello = (id?: number): ClientMessage => withId({ type: "hello", protocol: PROTOCOL, version: VERSION }, id);
export const classification = (gesture: Gesture): ClientMessage => ({ type: "classification", gesture });
export const gaze = (origin: Vec3, direction: Vec3): ClientMessage => ({ type: "gaze", origin, direction });
export const control = (action: ControlAction, id?: number): ClientMessage => withId({ type: "control", action }, id);
export const method = (m: Method, id?: number): ClientMessage => withId({ type: "method", method: m }, id);
export const shoulder = (p: Pose): ClientMessage => ({ type: "shoulder", position: p.position, orientation: p.orientation });

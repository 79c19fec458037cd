import { control, gaze, GESTURES, type Gesture, type Method, method } from "./protocol.js";
import { OperatorClient } from "./client.js";
import { CuePlayer, WebAudioSink } from "./cues.js";
import { DEFAULT_BINDINGS, GestureInput } from "./input.js";
import { draw } from "./render.js";
import { frameModel, initialView } from "./view.js";

const params = new URLSearchParams(location.search);
const url = params.get("server") ?? `ws://${location.hostname || "127.0.0.1"}:${params.get("port") ?? "8765"}/`;

const bindings: Record<string, Gesture> = { ...DEFAULT_BINDINGS };
for (const g of GESTURES) {
  const code = params.get(g);
  if (code) {
    for (const k of Object.keys(bindings)) if (bindings[k] === g) delete bindings[k];
    bindings[code] = g;
  }
}

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const view = initialView();

let audio: AudioContext | null = null;
try {
  audio = new AudioContext();
} catch {
  audio = null;
}
const cues = new CuePlayer(audio ? new WebAudioSink(audio) : null);
cues.muted = params.get("muted") === "1";

const client = new OperatorClient(url, (u) => new WebSocket(u), view, cues);
const input = new GestureInput((m) => client.send(m), bindings);

let cursor: [number, number] | null = null;
canvas.addEventListener("mousemove", (e) => {
  const r = canvas.getBoundingClientRect();
  cursor = [((e.clientX - r.left) * canvas.width) / r.width, ((e.clientY - r.top) * canvas.height) / r.height];
});
canvas.addEventListener("mouseleave", () => (cursor = null));

// gaze goes out once per received snapshot, so at the snapshot rate
client.onSnapshot = () => {
  if (!cursor) return;
  const ray = view.camera.unproject(cursor[0], cursor[1]);
  client.send(gaze(ray.origin, ray.direction));
};

window.addEventListener("keydown", (e) => {
  if (input.keyDown(e.code, e.repeat)) e.preventDefault();
  audio?.resume();
});
window.addEventListener("keyup", (e) => input.keyUp(e.code));
window.addEventListener("blur", () => input.releaseAll());

let yaw = Math.PI, pitch = 0.7, distance = 0.9;
let dragging: [number, number] | null = null;
canvas.addEventListener("mousedown", (e) => (dragging = [e.clientX, e.clientY]));
window.addEventListener("mouseup", () => (dragging = null));
window.addEventListener("mousemove", (e) => {
  if (!dragging || view.firstPerson) return;
  yaw -= (e.clientX - dragging[0]) * 0.005;
  pitch = Math.min(1.5, Math.max(0.05, pitch + (e.clientY - dragging[1]) * 0.005));
  dragging = [e.clientX, e.clientY];
});
canvas.addEventListener("wheel", (e) => {
  distance = Math.min(3, Math.max(0.3, distance * Math.exp(e.deltaY * 0.001)));
  e.preventDefault();
});

const button = (id: string, fn: () => void) => document.getElementById(id)?.addEventListener("click", fn);
for (const a of ["start", "stop", "pause", "resume", "reset"] as const) button(a, () => client.send(control(a)));
for (const m of ["A", "B", "C", "D"] as Method[]) button(`method-${m}`, () => client.send(method(m)));
button("first-person", () => (view.firstPerson = !view.firstPerson));
button("mute", () => (cues.muted = !cues.muted));

const status = document.getElementById("status")!;

function frame(now: number) {
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  view.camera.width = canvas.width;
  view.camera.height = canvas.height;
  if (view.firstPerson && view.scene && view.snapshot) view.camera.firstPerson(view.scene, view.snapshot.shoulder);
  else view.camera.orbit(yaw, pitch, distance, view.scene?.scene.box_frame.position ?? [0.35, 0, 0]);
  draw(ctx, frameModel(view, now), now < cues.flashUntil);
  status.textContent = `${client.url} ${view.connection}${cues.muted ? " (muted)" : ""}${view.lastError ? `  last error: ${view.lastError}` : ""}`;
  requestAnimationFrame(frame);
}

client.connect();
input.start();
requestAnimationFrame(frame);

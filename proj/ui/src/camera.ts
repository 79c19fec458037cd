import type { Pose, SceneMessage, Vec3 } from "./protocol.js";
import { add, cross, dot, normalize, rotate, scale, sub } from "./math.js";

export interface Ray {
  origin: Vec3;
  direction: Vec3;
}

/// Pinhole camera in the simulator's world frame (z up).
export class Camera {
  eye: Vec3 = [-0.6, 0.0, 0.5];
  target: Vec3 = [0.0, 0.0, 0.0];
  fovY = (50 * Math.PI) / 180;
  width = 960;
  height = 640;

  basis(): { forward: Vec3; right: Vec3; up: Vec3 } {
    const forward = normalize(sub(this.target, this.eye));
    let right = cross(forward, [0, 0, 1]);
    if (Math.hypot(...right) < 1e-9) right = [0, -1, 0];
    right = normalize(right);
    return { forward, right, up: cross(right, forward) };
  }

  private focal(): number {
    return this.height / 2 / Math.tan(this.fovY / 2);
  }

  /// Screen pixel of a world point, or null behind the camera.
  project(p: Vec3): [number, number] | null {
    const { forward, right, up } = this.basis();
    const d = sub(p, this.eye);
    const z = dot(d, forward);
    if (z <= 1e-6) return null;
    const f = this.focal();
    return [this.width / 2 + (f * dot(d, right)) / z, this.height / 2 - (f * dot(d, up)) / z];
  }

  /// Gaze ray through a screen pixel.
  unproject(px: number, py: number): Ray {
    const { forward, right, up } = this.basis();
    const f = this.focal();
    const x = (px - this.width / 2) / f;
    const y = (this.height / 2 - py) / f;
    return { origin: [...this.eye], direction: normalize(add(forward, add(scale(right, x), scale(up, y)))) };
  }

  /// Third-person orbit about the target; yaw about z, pitch above the horizon.
  orbit(yaw: number, pitch: number, distance: number, target: Vec3): void {
    this.target = target;
    const c = Math.cos(pitch);
    this.eye = add(target, [distance * c * Math.cos(yaw), distance * c * Math.sin(yaw), distance * Math.sin(pitch)]);
  }

  /// Approximate head-mounted view: eye at the head offset from the shoulder,
  /// looking at the box floor center.
  firstPerson(scene: SceneMessage, shoulder: Pose): void {
    this.eye = add(shoulder.position, rotate(shoulder.orientation, scene.head_offset));
    this.target = [...scene.scene.box_frame.position];
  }
}

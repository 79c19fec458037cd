import { describe, expect, it } from "vitest";
import { Camera } from "../src/camera.js";
import { normalize, sub } from "../src/math.js";
import type { Vec3 } from "../src/protocol.js";
import { scene } from "./fixtures.js";

const close = (a: Vec3, b: Vec3, tol = 1e-9) => a.forEach((v, i) => expect(v).toBeCloseTo(b[i], -Math.log10(tol)));

describe("Camera", () => {
  it("screen center unprojects to the forward axis", () => {
    const c = new Camera();
    c.orbit(0.7, 0.4, 1.2, [0.3, 0.1, 0]);
    const ray = c.unproject(c.width / 2, c.height / 2);
    close(ray.direction, normalize(sub(c.target, c.eye)));
    close(ray.origin, c.eye);
  });

  it("project and unproject are inverse", () => {
    const c = new Camera();
    c.orbit(2.0, 0.6, 0.8, [0.35, 0, 0]);
    const p: Vec3 = [0.4, -0.1, 0.05];
    const px = c.project(p)!;
    const ray = c.unproject(px[0], px[1]);
    close(ray.direction, normalize(sub(p, c.eye)));
  });

  it("points behind the camera do not project", () => {
    const c = new Camera();
    c.eye = [0, 0, 0];
    c.target = [1, 0, 0];
    expect(c.project([-1, 0, 0])).toBeNull();
  });

  it("first-person preset sits at the head offset and looks at the box", () => {
    const c = new Camera();
    const s = scene();
    c.firstPerson(s, { position: [0, 0, 0.3], orientation: [Math.SQRT1_2, 0, 0, Math.SQRT1_2] });
    // quarter turn about z maps (0.05, 0.18, 0.3) to (-0.18, 0.05, 0.3)
    close(c.eye, [-0.18, 0.05, 0.6]);
    close(c.target, [0.35, 0, 0]);
  });
});

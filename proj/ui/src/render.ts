import { COLORS, type Frame, type Pt } from "./view.js";

export function draw(ctx: CanvasRenderingContext2D, f: Frame, flash: boolean): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = flash ? "#fff6cc" : "#eef0f2";
  ctx.fillRect(0, 0, width, height);

  const line = (a: Pt, b: Pt, color: string, w: number) => {
    ctx.strokeStyle = color;
    ctx.lineWidth = w;
    ctx.beginPath();
    ctx.moveTo(a[0], a[1]);
    ctx.lineTo(b[0], b[1]);
    ctx.stroke();
  };
  const circle = (c: Pt, r: number) => {
    ctx.beginPath();
    ctx.arc(c[0], c[1], Math.max(r, 1), 0, 2 * Math.PI);
  };

  if (f.boxOutline.length) {
    ctx.fillStyle = "#c9b28f";
    ctx.beginPath();
    f.boxOutline.forEach((p, i) => (i ? ctx.lineTo(p[0], p[1]) : ctx.moveTo(p[0], p[1])));
    ctx.closePath();
    ctx.fill();
  }
  if (f.partition) line(f.partition[0], f.partition[1], "#6b5a40", 4);
  ctx.setLineDash([4, 4]);
  for (const t of f.targets) {
    circle(t.center, t.radius);
    ctx.strokeStyle = "#555";
    ctx.lineWidth = 1;
    ctx.stroke();
  }
  ctx.setLineDash([]);

  for (const b of f.blocks) {
    circle(b.center, b.radius);
    ctx.fillStyle = b.fill;
    ctx.fill();
    if (b.outline) {
      ctx.strokeStyle = b.outline;
      ctx.lineWidth = 4;
      ctx.stroke();
    }
    ctx.fillStyle = "#fff";
    ctx.font = "12px sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText(b.label, b.center[0], b.center[1]);
  }

  for (const [a, b] of f.links) line(a, b, COLORS.arm, 8);
  if (f.hand) {
    circle(f.hand.at, 9);
    ctx.fillStyle = f.hand.closed ? "#404040" : "#b0b0b0";
    ctx.fill();
  }

  if (f.marker) {
    circle(f.marker.at, 7);
    ctx.fillStyle = COLORS.marker;
    ctx.fill();
    if (f.marker.frozen) {
      ctx.strokeStyle = COLORS.locked;
      ctx.lineWidth = 3;
      ctx.stroke();
    }
  }

  ctx.textAlign = "left";
  ctx.textBaseline = "top";
  ctx.font = "16px sans-serif";
  if (f.modeText) {
    const at = f.modeText.at ?? [12, height - 28];
    ctx.fillStyle = "#111";
    ctx.fillText(f.modeText.text, at[0], at[1]);
  }
  ctx.fillStyle = "#111";
  ctx.fillText(f.timer, width - 60, 12);
  if (f.planStatus) ctx.fillText(f.planStatus, 12, 12);
  if (f.guard) {
    ctx.fillStyle = "#d9480f";
    ctx.fillText("GUARD: near singular, motion held", 12, 34);
  }

  const overlay = (text: string, color: string, y: number) => {
    ctx.fillStyle = color;
    ctx.fillRect(0, y, width, 40);
    ctx.fillStyle = "#fff";
    ctx.font = "20px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(text, width / 2, y + 10);
    ctx.textAlign = "left";
  };
  if (f.banner) overlay(f.banner, "rgba(20,20,20,0.8)", height / 2 - 20);
  if (f.stale) overlay(`Connection: ${f.status === "open" ? "no recent data" : f.status}`, "rgba(200,40,40,0.85)", 60);
}

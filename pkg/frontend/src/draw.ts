/** Canvas rendering for the arm views, gauges, and joystick pad. */

import { ArmPoints, Vec3, romNeedleFraction, tiltLevel } from "./arm.js";

export type View = "sagittal" | "top";

const OK_COLOR = "#3fa34d";
const WARN_COLOR = "#d7263d";
const BONE_COLOR = "#2b3a55";
const GRID_COLOR = "#e3e7ee";

/** World windows, chosen to frame the tabletop workspace. */
const WINDOWS = {
  sagittal: { h: [-0.15, 0.95] as const, v: [0.35, 1.45] as const },
  top: { h: [-0.15, 0.95] as const, v: [-0.65, 0.45] as const },
};

function project(view: View, p: Vec3): [number, number] {
  return view === "sagittal" ? [p[0], p[2]] : [p[0], p[1]];
}

function toCanvas(
  view: View,
  p: Vec3,
  width: number,
  height: number,
): [number, number] {
  const win = WINDOWS[view];
  const [h, v] = project(view, p);
  const x = ((h - win.h[0]) / (win.h[1] - win.h[0])) * width;
  const y = height - ((v - win.v[0]) / (win.v[1] - win.v[0])) * height;
  return [x, y];
}

export function drawArm(
  ctx: CanvasRenderingContext2D,
  view: View,
  points: ArmPoints,
  grasp: boolean,
  tiltDeg: number,
  stale: boolean,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.save();
  ctx.globalAlpha = stale ? 0.35 : 1;

  ctx.strokeStyle = GRID_COLOR;
  ctx.lineWidth = 1;
  for (let i = 1; i < 8; i++) {
    ctx.beginPath();
    ctx.moveTo((i * width) / 8, 0);
    ctx.lineTo((i * width) / 8, height);
    ctx.moveTo(0, (i * height) / 8);
    ctx.lineTo(width, (i * height) / 8);
    ctx.stroke();
  }

  const chain = [points.shoulder, points.elbow, points.wrist, points.hand];
  ctx.strokeStyle = BONE_COLOR;
  ctx.lineWidth = 5;
  ctx.lineCap = "round";
  ctx.beginPath();
  chain.forEach((p, i) => {
    const [x, y] = toCanvas(view, p, width, height);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();

  chain.forEach((p, i) => {
    const [x, y] = toCanvas(view, p, width, height);
    ctx.beginPath();
    ctx.arc(x, y, i === 3 ? 6 : 4, 0, 2 * Math.PI);
    ctx.fillStyle = i === 3 && grasp ? OK_COLOR : BONE_COLOR;
    ctx.fill();
  });

  if (view === "sagittal" && grasp) {
    const [hx, hy] = toCanvas(view, points.hand, width, height);
    ctx.save();
    ctx.translate(hx, hy - 10);
    ctx.rotate((tiltDeg * Math.PI) / 180);
    ctx.strokeStyle = tiltLevel(tiltDeg, 15) === "warn" ? WARN_COLOR : OK_COLOR;
    ctx.lineWidth = 2;
    ctx.strokeRect(-6, -9, 12, 14);
    ctx.restore();
  }
  ctx.restore();
}

export function drawTiltGauge(
  ctx: CanvasRenderingContext2D,
  tiltDeg: number,
  psiDeg: number,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  const full = 45;
  const frac = Math.min(Math.abs(tiltDeg), full) / full;
  ctx.fillStyle = "#f2f4f8";
  ctx.fillRect(0, 0, width, height);
  ctx.fillStyle = tiltLevel(tiltDeg, psiDeg) === "warn" ? WARN_COLOR : OK_COLOR;
  ctx.fillRect(0, 0, frac * width, height);
  const mark = (psiDeg / full) * width;
  ctx.strokeStyle = "#333";
  ctx.beginPath();
  ctx.moveTo(mark, 0);
  ctx.lineTo(mark, height);
  ctx.stroke();
}

export function drawWristDial(
  ctx: CanvasRenderingContext2D,
  angleDeg: number,
  loDeg: number,
  hiDeg: number,
  romFlag: boolean,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  const cx = width / 2;
  const cy = height - 8;
  const radius = Math.min(width / 2, height) - 12;
  const start = Math.PI;
  const span = Math.PI;

  ctx.strokeStyle = romFlag ? WARN_COLOR : "#b9c2d0";
  ctx.lineWidth = 8;
  ctx.beginPath();
  ctx.arc(cx, cy, radius, start, start + span);
  ctx.stroke();

  const frac = romNeedleFraction(angleDeg, loDeg, hiDeg);
  const a = start + frac * span;
  ctx.strokeStyle = BONE_COLOR;
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(cx + radius * Math.cos(a), cy + radius * Math.sin(a));
  ctx.stroke();

  const zero = start + romNeedleFraction(0, loDeg, hiDeg) * span;
  ctx.strokeStyle = "#888";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(cx + (radius - 10) * Math.cos(zero), cy + (radius - 10) * Math.sin(zero));
  ctx.lineTo(cx + radius * Math.cos(zero), cy + radius * Math.sin(zero));
  ctx.stroke();
}

export function drawPad(
  ctx: CanvasRenderingContext2D,
  axX: number,
  axY: number,
  enabled: boolean,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = enabled ? "#f2f4f8" : "#e8e8e8";
  ctx.fillRect(0, 0, width, height);
  ctx.strokeStyle = "#b9c2d0";
  ctx.strokeRect(1, 1, width - 2, height - 2);
  ctx.beginPath();
  ctx.moveTo(width / 2, 0);
  ctx.lineTo(width / 2, height);
  ctx.moveTo(0, height / 2);
  ctx.lineTo(width, height / 2);
  ctx.stroke();
  // Pad up is +x (axis 0, forward); pad left is +y (axis 1, leftward).
  const kx = width / 2 - axY * (width / 2 - 12);
  const ky = height / 2 - axX * (height / 2 - 12);
  ctx.beginPath();
  ctx.arc(kx, ky, 10, 0, 2 * Math.PI);
  ctx.fillStyle = enabled ? BONE_COLOR : "#999";
  ctx.fill();
}

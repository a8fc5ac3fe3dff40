/** DOM wiring: widgets feed the client's input state; a render loop draws
 * the latest broadcast.  Command emission runs on the client's own timer,
 * so frame rate never changes the command rate. */

import { armPoints, ROM_BAND_DEG } from "./arm.js";
import { TeleopClient } from "./client.js";
import { axesFromKeys, KEY_AXES } from "./input.js";
import { DEFAULT_PORT } from "./protocol.js";
import { isStale } from "./session.js";
import { drawArm, drawPad, drawTiltGauge, drawWristDial } from "./draw.js";

const SPILL_THRESHOLD_DEG = 15;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function ctx2d(id: string): CanvasRenderingContext2D {
  const c = el<HTMLCanvasElement>(id).getContext("2d");
  if (c === null) throw new Error(`no 2d context for #${id}`);
  return c;
}

const client = new TeleopClient();

const urlInput = el<HTMLInputElement>("url");
urlInput.value = `ws://127.0.0.1:${DEFAULT_PORT}`;
const connectBtn = el<HTMLButtonElement>("connect");
const statusSpan = el<HTMLSpanElement>("status");
const banner = el<HTMLDivElement>("banner");
const feed = el<HTMLUListElement>("feed");
const conditionSel = el<HTMLSelectElement>("condition");
const zLever = el<HTMLInputElement>("z-lever");
const psSlider = el<HTMLInputElement>("ps-slider");
const devSlider = el<HTMLInputElement>("dev-slider");
const padCanvas = el<HTMLCanvasElement>("pad");

connectBtn.addEventListener("click", () => {
  if (client.session.status === "disconnected" || client.session.status === "error") {
    client.connect(urlInput.value);
  } else {
    client.disconnect();
  }
});

el<HTMLButtonElement>("grasp").addEventListener("click", () => client.pressGrasp());
el<HTMLButtonElement>("release").addEventListener("click", () => client.pressRelease());
el<HTMLButtonElement>("estop").addEventListener("click", () => client.emergencyStop());
el<HTMLButtonElement>("resume").addEventListener("click", () => client.resume());
conditionSel.addEventListener("change", () => client.setCondition(conditionSel.value));

// Sliders are velocity-style: they snap back to zero on release.
function bindSlider(input: HTMLInputElement, axis: number): void {
  input.addEventListener("input", () => client.setAxis(axis, Number(input.value)));
  const snap = () => {
    input.value = "0";
    client.setAxis(axis, 0);
  };
  input.addEventListener("pointerup", snap);
  input.addEventListener("pointercancel", snap);
}
bindSlider(zLever, 2);
bindSlider(psSlider, 3);
bindSlider(devSlider, 4);

// Joystick pad: drag sets the planar axes, release recenters.
let padActive = false;
function padAxes(ev: PointerEvent): void {
  const rect = padCanvas.getBoundingClientRect();
  const nx = ((ev.clientX - rect.left) / rect.width) * 2 - 1;
  const ny = ((ev.clientY - rect.top) / rect.height) * 2 - 1;
  client.setAxis(0, -ny);
  client.setAxis(1, -nx);
}
padCanvas.addEventListener("pointerdown", (ev) => {
  padActive = true;
  padCanvas.setPointerCapture(ev.pointerId);
  padAxes(ev);
});
padCanvas.addEventListener("pointermove", (ev) => {
  if (padActive) padAxes(ev);
});
function padEnd(): void {
  padActive = false;
  client.setAxis(0, 0);
  client.setAxis(1, 0);
}
padCanvas.addEventListener("pointerup", padEnd);
padCanvas.addEventListener("pointercancel", padEnd);

// Keyboard: held keys map onto the same normalized axes as the widgets.
const held = new Set<string>();
document.addEventListener("keydown", (ev) => {
  if (ev.key === " ") {
    client.emergencyStop();
    ev.preventDefault();
    return;
  }
  if (ev.key === "g") client.pressGrasp();
  if (ev.key === "b") client.pressRelease();
  if (ev.key in KEY_AXES) {
    held.add(ev.key);
    client.setAxes(axesFromKeys(held));
    ev.preventDefault();
  }
});
document.addEventListener("keyup", (ev) => {
  if (held.delete(ev.key)) client.setAxes(axesFromKeys(held));
});

const sagittal = ctx2d("sagittal");
const top = ctx2d("top");
const tiltGauge = ctx2d("tilt-gauge");
const wristDial = ctx2d("wrist-dial");
const pad = ctx2d("pad");

function renderStatus(): void {
  const s = client.session;
  const age = client.stateAgeMs();
  const parts: string[] = [s.status];
  if (s.serverVersion !== null) parts.push(`v${s.serverVersion}`);
  if (s.lastState !== null) {
    parts.push(`${s.lastState.condition}`, `t=${s.lastState.t.toFixed(2)}s`);
  }
  if (age !== null) parts.push(`age ${Math.round(age)}ms`);
  if (s.stopped) parts.push("STOPPED");
  if (s.droppedFrames > 0) parts.push(`dropped ${s.droppedFrames}`);
  statusSpan.textContent = parts.join(" | ");
  statusSpan.className = s.status;
  banner.textContent = s.errorBanner ?? "";
  banner.style.display = s.errorBanner === null ? "none" : "block";
  connectBtn.textContent = s.status === "disconnected" || s.status === "error" ? "Connect" : "Disconnect";
}

function renderFeed(): void {
  const items = client.session.events.slice(-8).reverse();
  if (feed.childElementCount === items.length) {
    let same = true;
    items.forEach((text, i) => {
      if (feed.children[i]?.textContent !== text) same = false;
    });
    if (same) return;
  }
  feed.replaceChildren(
    ...items.map((text) => {
      const li = document.createElement("li");
      li.textContent = text;
      return li;
    }),
  );
}

function frame(): void {
  const s = client.session;
  const stale = isStale(s, Date.now());
  const state = s.lastState;
  const devEnabled = client.wristDevEnabled();

  devSlider.disabled = !devEnabled || !client.connected;
  if (devSlider.disabled && devSlider.value !== "0") devSlider.value = "0";
  psSlider.disabled = !client.connected;
  zLever.disabled = !client.connected;

  if (state !== null) {
    const points = armPoints(state.q_deg);
    drawArm(sagittal, "sagittal", points, state.grasp !== 0, state.tilt_deg, stale);
    drawArm(top, "top", points, state.grasp !== 0, state.tilt_deg, stale);
    drawTiltGauge(tiltGauge, state.tilt_deg, SPILL_THRESHOLD_DEG);
    drawWristDial(wristDial, state.q_deg[4], ROM_BAND_DEG[0], ROM_BAND_DEG[1], state.flags.rom !== 0);
    if (conditionSel.value !== state.condition) conditionSel.value = state.condition;
  }
  drawPad(pad, client.input.axes[0], client.input.axes[1], client.connected);
  renderStatus();
  renderFeed();
  requestAnimationFrame(frame);
}

requestAnimationFrame(frame);

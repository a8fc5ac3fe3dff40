/** Client-side session state: connection, latest broadcast, event feed. */

import { parseState, StatePayload, WireMessage } from "./protocol.js";

export type ConnectionStatus = "disconnected" | "connecting" | "connected" | "error";

/** Display goes stale when no state has arrived for this long. */
export const STALE_AFTER_MS = 100;

const FEED_LIMIT = 20;

export interface UiSessionState {
  status: ConnectionStatus;
  serverVersion: number | null;
  decimation: number;
  lastState: StatePayload | null;
  lastStateAtMs: number | null;
  stopped: boolean;
  events: string[];
  errorBanner: string | null;
  droppedFrames: number;
}

export function newSession(decimation: number): UiSessionState {
  return {
    status: "disconnected",
    serverVersion: null,
    decimation,
    lastState: null,
    lastStateAtMs: null,
    stopped: false,
    events: [],
    errorBanner: null,
    droppedFrames: 0,
  };
}

function pushEvent(s: UiSessionState, text: string): void {
  s.events.push(text);
  if (s.events.length > FEED_LIMIT) s.events.shift();
}

/** Fold one decoded server message into the session. */
export function applyMessage(s: UiSessionState, msg: WireMessage, nowMs: number): void {
  if (msg.kind === "hello") {
    s.status = "connected";
    s.errorBanner = null;
    const v = msg.payload.version;
    s.serverVersion = typeof v === "number" ? v : null;
    const d = msg.payload.decimation;
    if (typeof d === "number" && Number.isInteger(d)) s.decimation = d;
    return;
  }
  if (msg.kind === "state") {
    const state = parseState(msg.payload);
    if (state === null) {
      s.droppedFrames += 1;
      return;
    }
    s.lastState = state;
    s.lastStateAtMs = nowMs;
    s.stopped = state.flags.estopped !== 0;
    return;
  }
  if (msg.kind === "event") {
    const name = typeof msg.payload.name === "string" ? msg.payload.name : "?";
    const t = typeof msg.payload.t === "number" ? msg.payload.t.toFixed(2) : "?";
    if (name === "stopped") s.stopped = true;
    if (name === "resumed") s.stopped = false;
    pushEvent(s, `${name} @ ${t}s`);
    return;
  }
  if (msg.kind === "error") {
    const code = msg.payload.code ?? "error";
    const text = msg.payload.text ?? "";
    s.errorBanner = `${code}: ${text}`;
    s.status = "error";
  }
}

export function isStale(s: UiSessionState, nowMs: number): boolean {
  if (s.status !== "connected" || s.lastStateAtMs === null) return true;
  return nowMs - s.lastStateAtMs > STALE_AFTER_MS;
}

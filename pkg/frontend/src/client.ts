/** Teleoperation client: handshake, command timer, reconnect policy.
 *
 * The command timer is independent of rendering: callers poke input state
 * with setAxes / button methods whenever they like, and the client ships a
 * command message at a fixed rate while connected and un-stopped.  The
 * emergency stop bypasses the timer and goes out immediately.
 */

import {
  DEFAULT_DECIMATION,
  PROTOCOL_VERSION,
  ProtocolError,
  SequencedDecoder,
  WireMessage,
  encodeMessage,
} from "./protocol.js";
import { clampAxes, commandPayload, zeroInput, InputState } from "./input.js";
import { UiSessionState, applyMessage, newSession } from "./session.js";

export interface WireSocket {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => WireSocket;

export interface Scheduler {
  set(fn: () => void, ms: number): number;
  clear(handle: number): void;
}

export interface ClientOptions {
  decimation?: number;
  commandIntervalMs?: number;
  reconnectBaseMs?: number;
  reconnectMaxMs?: number;
  socketFactory?: SocketFactory;
  scheduler?: Scheduler;
  now?: () => number;
}

/** Errors after which reconnecting cannot help. */
const FATAL_CODES = new Set(["version-mismatch", "busy"]);

function defaultFactory(url: string): WireSocket {
  return new WebSocket(url) as unknown as WireSocket;
}

const defaultScheduler: Scheduler = {
  set: (fn, ms) => setTimeout(fn, ms) as unknown as number,
  clear: (h) => clearTimeout(h),
};

export class TeleopClient {
  readonly session: UiSessionState;
  readonly input: InputState = zeroInput();

  private readonly decimation: number;
  private readonly intervalMs: number;
  private readonly reconnectBaseMs: number;
  private readonly reconnectMaxMs: number;
  private readonly factory: SocketFactory;
  private readonly scheduler: Scheduler;
  private readonly now: () => number;

  private socket: WireSocket | null = null;
  private decoder = new SequencedDecoder();
  private seq = 0;
  private url = "";
  private manual = false;
  private fatal = false;
  private stopLatched = false;
  private attempts = 0;
  private loopHandle: number | null = null;
  private retryHandle: number | null = null;

  constructor(opts: ClientOptions = {}) {
    this.decimation = opts.decimation ?? DEFAULT_DECIMATION;
    this.intervalMs = opts.commandIntervalMs ?? 50;
    this.reconnectBaseMs = opts.reconnectBaseMs ?? 500;
    this.reconnectMaxMs = opts.reconnectMaxMs ?? 8000;
    this.factory = opts.socketFactory ?? defaultFactory;
    this.scheduler = opts.scheduler ?? defaultScheduler;
    this.now = opts.now ?? (() => Date.now());
    this.session = newSession(this.decimation);
  }

  connect(url: string): void {
    if (this.socket !== null) return;
    if (this.retryHandle !== null) {
      this.scheduler.clear(this.retryHandle);
      this.retryHandle = null;
    }
    this.url = url;
    this.manual = false;
    this.fatal = false;
    this.decoder = new SequencedDecoder();
    this.seq = 0;
    this.session.status = "connecting";
    const sock = this.factory(url);
    this.socket = sock;
    const live = () => this.socket === sock;
    sock.onopen = () => {
      if (!live()) return;
      this.sendNow("hello", {
        version: PROTOCOL_VERSION,
        decimation: this.decimation,
        role: "operator",
        t: this.now() / 1000,
      });
    };
    sock.onmessage = (ev) => {
      if (live()) this.onData(String(ev.data));
    };
    sock.onclose = () => {
      if (live()) this.onClosed();
    };
    sock.onerror = () => {};
  }

  disconnect(): void {
    this.manual = true;
    if (this.retryHandle !== null) {
      this.scheduler.clear(this.retryHandle);
      this.retryHandle = null;
    }
    if (this.socket !== null) this.socket.close();
    this.onClosed();
  }

  get connected(): boolean {
    return this.session.status === "connected";
  }

  /** True when the deviation axis should be live in the UI. */
  wristDevEnabled(): boolean {
    const s = this.session.lastState;
    return s === null || s.condition !== "wrist_locked";
  }

  stateAgeMs(): number | null {
    const at = this.session.lastStateAtMs;
    return at === null ? null : this.now() - at;
  }

  setAxes(axes: readonly number[]): void {
    this.input.axes = clampAxes(axes);
  }

  setAxis(i: number, v: number): void {
    const axes = [...this.input.axes];
    axes[i] = v;
    this.input.axes = clampAxes(axes);
  }

  pressGrasp(): void {
    this.input.grasp = true;
  }

  pressRelease(): void {
    this.input.release = true;
  }

  /** Zero the sticks and ship the stop event ahead of any queued command. */
  emergencyStop(): void {
    this.stopLatched = true;
    this.session.stopped = true;
    this.input.axes = [0, 0, 0, 0, 0];
    this.sendNow("event", { name: "stop", t: this.now() / 1000 });
  }

  resume(): void {
    this.stopLatched = false;
    this.sendNow("event", { name: "resume", t: this.now() / 1000 });
  }

  setCondition(condition: string): void {
    this.sendNow("event", { name: "set_condition", condition, t: this.now() / 1000 });
  }

  private sendNow(kind: WireMessage["kind"], payload: Record<string, unknown>): void {
    if (this.socket === null) return;
    this.socket.send(encodeMessage({ kind, seq: this.seq++, payload }));
  }

  private onData(data: string): void {
    for (const line of data.split("\n")) {
      if (line.trim() === "") continue;
      let msg: WireMessage;
      try {
        msg = this.decoder.decode(line);
      } catch (exc) {
        if (exc instanceof ProtocolError) {
          this.session.errorBanner = `${exc.code}: ${exc.message}`;
          this.socket?.close();
          return;
        }
        throw exc;
      }
      const wasConnected = this.connected;
      applyMessage(this.session, msg, this.now());
      if (msg.kind === "hello" && !wasConnected) {
        this.attempts = 0;
        this.startLoop();
      }
      if (msg.kind === "error" && FATAL_CODES.has(String(msg.payload.code))) {
        this.fatal = true;
      }
    }
  }

  private startLoop(): void {
    if (this.loopHandle !== null) return;
    const step = () => {
      this.tick();
      this.loopHandle = this.scheduler.set(step, this.intervalMs);
    };
    this.loopHandle = this.scheduler.set(step, this.intervalMs);
  }

  private tick(): void {
    if (!this.connected || this.session.stopped || this.stopLatched) return;
    if (!this.wristDevEnabled()) this.input.axes[4] = 0;
    this.sendNow("command", commandPayload(this.input, this.now() / 1000));
    this.input.grasp = false;
    this.input.release = false;
  }

  private onClosed(): void {
    if (this.loopHandle !== null) {
      this.scheduler.clear(this.loopHandle);
      this.loopHandle = null;
    }
    this.socket = null;
    if (this.session.status !== "error") this.session.status = "disconnected";
    if (this.manual || this.fatal) return;
    const delay = Math.min(
      this.reconnectBaseMs * 2 ** Math.min(this.attempts, 5),
      this.reconnectMaxMs,
    );
    this.attempts += 1;
    this.retryHandle = this.scheduler.set(() => {
      this.retryHandle = null;
      this.connect(this.url);
    }, delay);
  }
}

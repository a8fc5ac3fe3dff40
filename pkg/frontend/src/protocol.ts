/** Newline-delimited JSON wire protocol shared with the simulator. */

export const PROTOCOL_VERSION = 1;
export const DEFAULT_PORT = 8571;
export const DEFAULT_DECIMATION = 5;

export const MESSAGE_KINDS = ["hello", "command", "state", "event", "error"] as const;
export type MessageKind = (typeof MESSAGE_KINDS)[number];

export interface WireMessage {
  kind: MessageKind;
  seq: number;
  payload: Record<string, unknown>;
}

export interface StateFlags {
  speed: number;
  rom: number;
  estopped: number;
}

/** One decoded `state` broadcast: joint angles in degrees, hand in meters. */
export interface StatePayload {
  t: number;
  q_deg: [number, number, number, number, number];
  grasp: number;
  hand_pos_m: [number, number, number];
  tilt_deg: number;
  theta_ref_deg: number;
  condition: string;
  flags: StateFlags;
}

export class ProtocolError extends Error {
  constructor(public code: string, text: string) {
    super(text);
    this.name = "ProtocolError";
  }
}

/** JSON with sorted keys and no spacing, matching the server's framing. */
export function stableStringify(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(stableStringify).join(",") + "]";
  }
  const obj = value as Record<string, unknown>;
  const parts = Object.keys(obj)
    .filter((k) => obj[k] !== undefined)
    .sort()
    .map((k) => JSON.stringify(k) + ":" + stableStringify(obj[k]));
  return "{" + parts.join(",") + "}";
}

export function encodeMessage(m: WireMessage): string {
  if (!MESSAGE_KINDS.includes(m.kind)) {
    throw new ProtocolError("bad-kind", `unknown message kind ${m.kind}`);
  }
  return stableStringify({ ...m.payload, kind: m.kind, seq: m.seq }) + "\n";
}

export function decodeMessage(line: string): WireMessage {
  let body: unknown;
  try {
    body = JSON.parse(line);
  } catch (exc) {
    throw new ProtocolError("bad-json", `malformed line: ${exc}`);
  }
  if (body === null || typeof body !== "object" || Array.isArray(body)) {
    throw new ProtocolError("bad-json", "message must be a JSON object");
  }
  const { kind, seq, ...payload } = body as Record<string, unknown>;
  if (!MESSAGE_KINDS.includes(kind as MessageKind)) {
    throw new ProtocolError("bad-kind", `unknown message kind ${kind}`);
  }
  if (typeof seq !== "number" || !Number.isInteger(seq)) {
    throw new ProtocolError("bad-seq", "seq must be an integer");
  }
  return { kind: kind as MessageKind, seq, payload };
}

/** Decodes a message stream, enforcing strictly increasing seq. */
export class SequencedDecoder {
  lastSeq = -1;

  decode(line: string): WireMessage {
    const msg = decodeMessage(line);
    if (msg.seq <= this.lastSeq) {
      throw new ProtocolError("bad-seq", `seq ${msg.seq} not above ${this.lastSeq}`);
    }
    this.lastSeq = msg.seq;
    return msg;
  }
}

function numberArray(v: unknown, n: number): number[] | null {
  if (!Array.isArray(v) || v.length !== n) return null;
  if (!v.every((x) => typeof x === "number" && Number.isFinite(x))) return null;
  return v as number[];
}

/** Validate a `state` payload; null means the frame should be skipped. */
export function parseState(payload: Record<string, unknown>): StatePayload | null {
  const q = numberArray(payload.q_deg, 5);
  const pos = numberArray(payload.hand_pos_m, 3);
  const flags = payload.flags as Record<string, unknown> | undefined;
  if (
    q === null ||
    pos === null ||
    typeof payload.t !== "number" ||
    typeof payload.grasp !== "number" ||
    typeof payload.tilt_deg !== "number" ||
    typeof payload.theta_ref_deg !== "number" ||
    typeof payload.condition !== "string" ||
    flags === null ||
    typeof flags !== "object" ||
    typeof flags.speed !== "number" ||
    typeof flags.rom !== "number" ||
    typeof flags.estopped !== "number"
  ) {
    return null;
  }
  return {
    t: payload.t,
    q_deg: q as StatePayload["q_deg"],
    grasp: payload.grasp,
    hand_pos_m: pos as StatePayload["hand_pos_m"],
    tilt_deg: payload.tilt_deg,
    theta_ref_deg: payload.theta_ref_deg,
    condition: payload.condition,
    flags: { speed: flags.speed, rom: flags.rom, estopped: flags.estopped },
  };
}

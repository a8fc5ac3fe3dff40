import { describe, expect, it } from "vitest";

import {
  ProtocolError,
  SequencedDecoder,
  decodeMessage,
  encodeMessage,
  parseState,
  stableStringify,
} from "../src/protocol.js";

describe("framing", () => {
  it("encodes one sorted-key compact JSON object per line", () => {
    const line = encodeMessage({
      kind: "command",
      seq: 3,
      payload: { t: 1.5, axes: [0, 1, 0, 0, 0], buttons: {} },
    });
    expect(line).toBe('{"axes":[0,1,0,0,0],"buttons":{},"kind":"command","seq":3,"t":1.5}\n');
  });

  it("sorts nested object keys and drops undefined values", () => {
    expect(stableStringify({ b: { z: 1, a: [2, null] }, a: 0, skip: undefined })).toBe(
      '{"a":0,"b":{"a":[2,null],"z":1}}',
    );
  });

  it("round-trips through decode", () => {
    const msg = decodeMessage(
      encodeMessage({ kind: "event", seq: 7, payload: { name: "stop", t: 2 } }),
    );
    expect(msg.kind).toBe("event");
    expect(msg.seq).toBe(7);
    expect(msg.payload).toEqual({ name: "stop", t: 2 });
  });

  it("rejects malformed frames with typed errors", () => {
    expect(() => decodeMessage("not json")).toThrowError(ProtocolError);
    expect(() => decodeMessage("[1,2]")).toThrowError(/JSON object/);
    expect(() => decodeMessage('{"kind":"nope","seq":1}')).toThrowError(/kind/);
    expect(() => decodeMessage('{"kind":"state","seq":1.5}')).toThrowError(/integer/);
    expect(() => decodeMessage('{"kind":"state","seq":"4"}')).toThrowError(/integer/);
    expect(() => decodeMessage('{"kind":"state"}')).toThrowError(/integer/);
  });

  it("tolerates the trailing newline the server sends", () => {
    expect(decodeMessage('{"kind":"hello","seq":0}\n').kind).toBe("hello");
  });
});

describe("sequencing", () => {
  it("requires strictly increasing seq across all kinds", () => {
    const dec = new SequencedDecoder();
    dec.decode('{"kind":"hello","seq":0}');
    dec.decode('{"kind":"state","seq":1}');
    expect(() => dec.decode('{"kind":"state","seq":1}')).toThrowError(/not above/);
    expect(() => dec.decode('{"kind":"event","seq":0}')).toThrowError(/not above/);
    dec.decode('{"kind":"state","seq":5}');
    expect(dec.lastSeq).toBe(5);
  });
});

const GOOD_STATE = {
  t: 1.23,
  q_deg: [10, 0, -20, 5, 3],
  grasp: 1,
  hand_pos_m: [0.4, -0.1, 0.8],
  tilt_deg: 2.5,
  theta_ref_deg: 3.0,
  condition: "wrist_enabled",
  flags: { speed: 0, rom: 0, estopped: 0 },
};

describe("state payload validation", () => {
  it("accepts a complete broadcast", () => {
    const state = parseState({ ...GOOD_STATE });
    expect(state).not.toBeNull();
    expect(state?.q_deg).toEqual([10, 0, -20, 5, 3]);
    expect(state?.flags.estopped).toBe(0);
  });

  it("returns null for missing or malformed fields", () => {
    expect(parseState({ ...GOOD_STATE, q_deg: [1, 2, 3] })).toBeNull();
    expect(parseState({ ...GOOD_STATE, q_deg: [1, 2, 3, 4, "x"] })).toBeNull();
    expect(parseState({ ...GOOD_STATE, hand_pos_m: undefined })).toBeNull();
    expect(parseState({ ...GOOD_STATE, t: "1.2" })).toBeNull();
    expect(parseState({ ...GOOD_STATE, flags: { speed: 0 } })).toBeNull();
    expect(parseState({ ...GOOD_STATE, condition: 4 })).toBeNull();
  });
});

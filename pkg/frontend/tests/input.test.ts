import { describe, expect, it } from "vitest";

import {
  axesFromKeys,
  clampAxes,
  commandPayload,
  zeroInput,
} from "../src/input.js";

describe("axis clamping", () => {
  it("limits every axis to [-1, 1] and zeroes non-finite values", () => {
    expect(clampAxes([2, -3, 0.5, NaN, Infinity])).toEqual([1, -1, 0.5, 0, 0]);
  });

  it("pads short input to five axes", () => {
    expect(clampAxes([1])).toEqual([1, 0, 0, 0, 0]);
  });
});

describe("command payload", () => {
  it("centered controls produce a zero command", () => {
    expect(commandPayload(zeroInput(), 4.5)).toEqual({
      axes: [0, 0, 0, 0, 0],
      buttons: {},
      t: 4.5,
    });
  });

  it("carries only pressed buttons and clamps deflection", () => {
    const input = zeroInput();
    input.axes = [5, 0, 0, 0, -5];
    input.grasp = true;
    const payload = commandPayload(input, 1);
    expect(payload.axes).toEqual([1, 0, 0, 0, -1]);
    expect(payload.buttons).toEqual({ grasp: true });
  });
});

describe("keyboard mapping", () => {
  it("maps held keys to signed axes", () => {
    expect(axesFromKeys(new Set(["ArrowUp", "a"]))).toEqual([1, 0, 0, 0, 1]);
    expect(axesFromKeys(new Set(["ArrowDown", "ArrowRight", "s", "e", "d"]))).toEqual([
      -1, -1, -1, -1, -1,
    ]);
  });

  it("cancels opposing keys", () => {
    expect(axesFromKeys(new Set(["ArrowUp", "ArrowDown"]))).toEqual([0, 0, 0, 0, 0]);
  });

  it("ignores unbound keys", () => {
    expect(axesFromKeys(new Set(["x", "Shift"]))).toEqual([0, 0, 0, 0, 0]);
  });
});

/** Operator input state and its mapping onto wire command payloads. */

export type Axes = [number, number, number, number, number];

export interface InputState {
  /** [forward, leftward, up, pronation, deviation], each in [-1, 1]. */
  axes: Axes;
  grasp: boolean;
  release: boolean;
}

export function zeroInput(): InputState {
  return { axes: [0, 0, 0, 0, 0], grasp: false, release: false };
}

export function clampAxis(v: number): number {
  if (!Number.isFinite(v)) return 0;
  return Math.min(1, Math.max(-1, v));
}

export function clampAxes(axes: readonly number[]): Axes {
  const out: Axes = [0, 0, 0, 0, 0];
  for (let i = 0; i < 5; i++) out[i] = clampAxis(axes[i] ?? 0);
  return out;
}

/** Command payload for the wire; buttons carry only the pressed flags. */
export function commandPayload(
  input: InputState,
  t: number,
): Record<string, unknown> {
  const buttons: Record<string, boolean> = {};
  if (input.grasp) buttons.grasp = true;
  if (input.release) buttons.release = true;
  return { axes: clampAxes(input.axes), buttons, t };
}

/** Key bindings: [axis index, direction]. World y points to the user's
 * left, so ArrowLeft is +1 on axis 1. */
export const KEY_AXES: Record<string, [number, number]> = {
  ArrowUp: [0, 1],
  ArrowDown: [0, -1],
  ArrowLeft: [1, 1],
  ArrowRight: [1, -1],
  w: [2, 1],
  s: [2, -1],
  q: [3, 1],
  e: [3, -1],
  a: [4, 1],
  d: [4, -1],
};

/** Axes from the set of currently held keys; opposing keys cancel. */
export function axesFromKeys(held: ReadonlySet<string>): Axes {
  const axes: Axes = [0, 0, 0, 0, 0];
  for (const key of held) {
    const bind = KEY_AXES[key];
    if (bind) axes[bind[0]] += bind[1];
  }
  return clampAxes(axes);
}

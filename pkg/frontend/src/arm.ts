/** Arm geometry for the display, re-derived from the documented
 * convention: world x forward, y to the user's left, z up; shoulder at
 * (0.10, -0.20, 0.95); rotation order shoulder FE (local y), shoulder IE
 * (local x), elbow FE (local y), forearm PS (local x), wrist deviation
 * (local -y); links extend along local +x. */

export type Vec3 = [number, number, number];
type Quat = [number, number, number, number];

export const BASE: Vec3 = [0.1, -0.2, 0.95];
export const UPPER_ARM_LEN = 0.3;
export const FOREARM_LEN = 0.25;
export const HAND_LEN = 0.08;

/** Default wrist range-of-motion band drawn on the dial, degrees. */
export const ROM_BAND_DEG: [number, number] = [-40, 30];

function rotY(q: Quat, angle: number): Quat {
  const c = Math.cos(0.5 * angle);
  const s = Math.sin(0.5 * angle);
  const [w, x, y, z] = q;
  return [w * c - y * s, x * c - z * s, w * s + y * c, x * s + z * c];
}

function rotX(q: Quat, angle: number): Quat {
  const c = Math.cos(0.5 * angle);
  const s = Math.sin(0.5 * angle);
  const [w, x, y, z] = q;
  return [w * c - x * s, w * s + x * c, y * c + z * s, z * c - y * s];
}

/** Image of local +x: the direction a link extends along. */
function colX(q: Quat): Vec3 {
  const [w, x, y, z] = q;
  return [
    1 - 2 * (y * y + z * z),
    2 * (x * y + w * z),
    2 * (x * z - w * y),
  ];
}

export interface ArmPoints {
  shoulder: Vec3;
  elbow: Vec3;
  wrist: Vec3;
  hand: Vec3;
}

/** Joint positions in the world frame from the broadcast joint angles. */
export function armPoints(qDeg: readonly number[]): ArmPoints {
  const r = (i: number) => ((qDeg[i] ?? 0) * Math.PI) / 180;
  const qb = rotX(rotY([1, 0, 0, 0], r(0)), r(1));
  const u = colX(qb);
  const elbow: Vec3 = [
    BASE[0] + UPPER_ARM_LEN * u[0],
    BASE[1] + UPPER_ARM_LEN * u[1],
    BASE[2] + UPPER_ARM_LEN * u[2],
  ];
  const qd = rotX(rotY(qb, r(2)), r(3));
  const f = colX(qd);
  const wrist: Vec3 = [
    elbow[0] + FOREARM_LEN * f[0],
    elbow[1] + FOREARM_LEN * f[1],
    elbow[2] + FOREARM_LEN * f[2],
  ];
  const h = colX(rotY(qd, -r(4)));
  const hand: Vec3 = [
    wrist[0] + HAND_LEN * h[0],
    wrist[1] + HAND_LEN * h[1],
    wrist[2] + HAND_LEN * h[2],
  ];
  return { shoulder: [...BASE], elbow, wrist, hand };
}

/** Gauge coloring against the spill threshold. */
export function tiltLevel(tiltDeg: number, psiDeg: number): "ok" | "warn" {
  return Math.abs(tiltDeg) >= psiDeg ? "warn" : "ok";
}

/** Needle position in [0, 1] along the dial; angles outside the band pin
 * to its edges so the needle never leaves the drawn range. */
export function romNeedleFraction(angleDeg: number, loDeg: number, hiDeg: number): number {
  const clamped = Math.min(hiDeg, Math.max(loDeg, angleDeg));
  return (clamped - loDeg) / (hiDeg - loDeg);
}

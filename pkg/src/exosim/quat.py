"""Unit-quaternion helpers used by the kinematic chain.

Quaternions are plain ``(w, x, y, z)`` tuples so the simulation tick loop
stays allocation-light; callers that want numpy arrays convert at the edge.
All rotation quaternions are kept unit-norm by construction.
"""

from __future__ import annotations

import math

Quat = tuple[float, float, float, float]
Vec3 = tuple[float, float, float]

IDENTITY: Quat = (1.0, 0.0, 0.0, 0.0)


def from_axis_angle(axis: Vec3, angle: float) -> Quat:
    """Quaternion rotating by `angle` (rad) about `axis` (need not be unit)."""
    ax, ay, az = axis
    n = math.sqrt(ax * ax + ay * ay + az * az)
    if n == 0.0:
        raise ValueError("rotation axis must be nonzero")
    half = 0.5 * angle
    s = math.sin(half) / n
    return (math.cos(half), ax * s, ay * s, az * s)


def mul(a: Quat, b: Quat) -> Quat:
    """Hamilton product a*b (apply b first, then a, for frame composition)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def conj(q: Quat) -> Quat:
    w, x, y, z = q
    return (w, -x, -y, -z)


def norm(q: Quat) -> float:
    w, x, y, z = q
    return math.sqrt(w * w + x * x + y * y + z * z)


def normalize(q: Quat) -> Quat:
    n = norm(q)
    if n == 0.0:
        raise ValueError("cannot normalize zero quaternion")
    inv = 1.0 / n
    w, x, y, z = q
    return (w * inv, x * inv, y * inv, z * inv)


def rotate(q: Quat, v: Vec3) -> Vec3:
    """Rotate vector v by unit quaternion q (q v q*)."""
    w, x, y, z = q
    vx, vy, vz = v
    # t = 2 * (q_vec x v)
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    # v' = v + w*t + q_vec x t
    return (
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    )

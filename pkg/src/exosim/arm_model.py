"""Serial-chain kinematics for the 6-DoF arm.

Joint order along the chain: shoulder flexion-extension, shoulder
internal-external rotation, elbow flexion-extension, forearm
pronation-supination, wrist abduction-adduction (radial deviation positive),
plus a dimensionless grasp state.

Frame convention (single source of truth, mirrored by the UI):
world x forward, y to the user's left, z up; the base pose places the
shoulder center.  In the zero pose the arm is extended along +x with every
link frame world-aligned.  A fixed passive shoulder Ab-Ad rotation about +x
is applied before the active joints.  Shoulder and elbow FE rotate about the
local +y axis, shoulder IE and forearm PS about the local +x (long) axis,
and wrist deviation about the local -y axis so that positive deviation is
abduction (fingertips toward the thumb side, upward in the zero pose).

The hand frame's +z axis is the cup-up axis; +x points along the fingers.
The cup-tilt decomposition splits the angle between cup-up and world up into
the component the wrist joint can cancel (a rotation about the deviation
axis) and the remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import quat
from .quat import Quat, Vec3

WORLD_UP: Vec3 = (0.0, 0.0, 1.0)

# Default wrist range of motion: 40 deg adduction, 30 deg abduction.
WRIST_ROM_DEFAULT: tuple[float, float] = (math.radians(-40.0), math.radians(30.0))

_DEGENERATE_TOL = 1e-12


@dataclass(frozen=True, slots=True)
class Pose:
    """Position plus unit-quaternion orientation in the world frame."""

    position: Vec3
    orientation: Quat

    def __post_init__(self) -> None:
        if abs(quat.norm(self.orientation) - 1.0) > 1e-9:
            raise ValueError("orientation must be a unit quaternion")


POSE_IDENTITY = Pose((0.0, 0.0, 0.0), quat.IDENTITY)


@dataclass(frozen=True, slots=True)
class JointConfig:
    """The five joint angles (rad) plus grasp state in [0, 1]."""

    q_shoulder_fe: float = 0.0
    q_shoulder_ie: float = 0.0
    q_elbow_fe: float = 0.0
    q_forearm_ps: float = 0.0
    q_wrist_dev: float = 0.0
    grasp: float = 0.0

    def __post_init__(self) -> None:
        angles = (self.q_shoulder_fe, self.q_shoulder_ie, self.q_elbow_fe,
                  self.q_forearm_ps, self.q_wrist_dev, self.grasp)
        if not all(math.isfinite(v) for v in angles):
            raise ValueError("joint configuration must be finite")
        if not 0.0 <= self.grasp <= 1.0:
            raise ValueError("grasp must lie in [0, 1]")

    def proximal(self) -> tuple[float, float, float, float]:
        return (self.q_shoulder_fe, self.q_shoulder_ie,
                self.q_elbow_fe, self.q_forearm_ps)


@dataclass(frozen=True, slots=True)
class ChainGeometry:
    """Link lengths (m), fixed passive shoulder Ab-Ad, and base pose."""

    upper_arm_len: float = 0.30
    forearm_len: float = 0.25
    hand_len: float = 0.08
    shoulder_abad_fixed: float = 0.0
    base_pose: Pose = POSE_IDENTITY

    def __post_init__(self) -> None:
        if min(self.upper_arm_len, self.forearm_len, self.hand_len) <= 0.0:
            raise ValueError("link lengths must be positive")
        if not math.isfinite(self.shoulder_abad_fixed):
            raise ValueError("shoulder Ab-Ad angle must be finite")

    def base_quat(self) -> Quat:
        """Orientation at the chain root including the passive Ab-Ad."""
        if self.shoulder_abad_fixed == 0.0:
            return self.base_pose.orientation
        return quat.mul(self.base_pose.orientation,
                        quat.from_axis_angle((1.0, 0.0, 0.0),
                                             self.shoulder_abad_fixed))


class TiltResult(NamedTuple):
    tilt_total: float
    tilt_correctable: float
    degenerate: bool


class DeviationResult(NamedTuple):
    angle: float
    clamped: bool


def _col_x(q: Quat) -> Vec3:
    """First rotation-matrix column: the image of local +x."""
    w, x, y, z = q
    return (1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y + w * z),
            2.0 * (x * z - w * y))


def _col_y(q: Quat) -> Vec3:
    w, x, y, z = q
    return (2.0 * (x * y - w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z + w * x))


def _col_z(q: Quat) -> Vec3:
    w, x, y, z = q
    return (2.0 * (x * z + w * y),
            2.0 * (y * z - w * x),
            1.0 - 2.0 * (x * x + y * y))


def _rot_y(q: Quat, angle: float) -> Quat:
    """Compose q with a local rotation about +y."""
    half = 0.5 * angle
    c, s = math.cos(half), math.sin(half)
    w, x, y, z = q
    return (w * c - y * s, x * c - z * s, w * s + y * c, x * s + z * c)


def _rot_x(q: Quat, angle: float) -> Quat:
    half = 0.5 * angle
    c, s = math.cos(half), math.sin(half)
    w, x, y, z = q
    return (w * c - x * s, w * s + x * c, y * c + z * s, z * c - y * s)


class ChainFrames(NamedTuple):
    """Intermediate frames shared by FK, the Jacobian, and the tick loop."""

    p_elbow: Vec3
    p_wrist: Vec3
    p_hand: Vec3
    q_after_fe: Quat
    q_upper: Quat
    q_after_el: Quat
    q_forearm: Quat
    q_hand: Quat


def chain_frames(geom: ChainGeometry, q1: float, q2: float, q3: float,
                 q4: float, q5: float) -> ChainFrames:
    """Float kernel computing every frame of the chain in one pass."""
    q0 = geom.base_quat()
    bx, by, bz = geom.base_pose.position

    qa = _rot_y(q0, q1)
    qb = _rot_x(qa, q2)
    ux, uy, uz = _col_x(qb)
    lua = geom.upper_arm_len
    ex, ey, ez = bx + lua * ux, by + lua * uy, bz + lua * uz

    qc = _rot_y(qb, q3)
    qd = _rot_x(qc, q4)
    fx, fy, fz = _col_x(qd)
    lfa = geom.forearm_len
    wx, wy, wz = ex + lfa * fx, ey + lfa * fy, ez + lfa * fz

    qe = _rot_y(qd, -q5)
    hx, hy, hz = _col_x(qe)
    lh = geom.hand_len
    return ChainFrames(
        (ex, ey, ez), (wx, wy, wz),
        (wx + lh * hx, wy + lh * hy, wz + lh * hz),
        qa, qb, qc, qd, qe)


def _validate_q(q: JointConfig) -> None:
    if not isinstance(q, JointConfig):
        raise TypeError("expected a JointConfig")


def forward_kinematics(geom: ChainGeometry, q: JointConfig) -> Pose:
    """Hand-frame pose for the given joint configuration."""
    _validate_q(q)
    fr = chain_frames(geom, q.q_shoulder_fe, q.q_shoulder_ie,
                      q.q_elbow_fe, q.q_forearm_ps, q.q_wrist_dev)
    return Pose(fr.p_hand, quat.normalize(fr.q_hand))


def jacobian_columns(geom: ChainGeometry, q1: float, q2: float, q3: float,
                     q4: float, q5: float) -> tuple[ChainFrames, tuple]:
    """Frames plus the four positional Jacobian columns as float triples."""
    fr = chain_frames(geom, q1, q2, q3, q4, q5)
    q0 = geom.base_quat()
    axes = (_col_y(q0), _col_x(fr.q_after_fe),
            _col_y(fr.q_upper), _col_x(fr.q_after_el))
    origins = (geom.base_pose.position, geom.base_pose.position,
               fr.p_elbow, fr.p_elbow)
    hx, hy, hz = fr.p_hand
    cols = []
    for (ax, ay, az), (ox, oy, oz) in zip(axes, origins):
        rx, ry, rz = hx - ox, hy - oy, hz - oz
        cols.append((ay * rz - az * ry, az * rx - ax * rz, ax * ry - ay * rx))
    return fr, tuple(cols)


def positional_jacobian(geom: ChainGeometry, q: JointConfig) -> np.ndarray:
    """3x4 matrix mapping proximal joint rates to hand-point velocity."""
    _validate_q(q)
    _, cols = jacobian_columns(geom, q.q_shoulder_fe, q.q_shoulder_ie,
                               q.q_elbow_fe, q.q_forearm_ps, q.q_wrist_dev)
    return np.array(cols, dtype=float).T


def tilt_from_quat(q_hand: Quat) -> TiltResult:
    """Tilt decomposition from the hand orientation alone."""
    ux, uy, uz = _col_z(q_hand)
    ax, ay, az = _col_y(q_hand)
    ax, ay, az = -ax, -ay, -az

    tilt_total = math.atan2(math.hypot(ux, uy), uz)

    # Projections of world up and the cup axis onto the plane normal to the
    # deviation axis; if either vanishes no wrist motion can change the tilt.
    za = az
    ua = ux * ax + uy * ay + uz * az
    z_perp_sq = 1.0 - za * za
    u_perp_sq = 1.0 - ua * ua
    if z_perp_sq < _DEGENERATE_TOL or u_perp_sq < _DEGENERATE_TOL:
        return TiltResult(tilt_total, 0.0, True)

    # a . (z x u) equals a . (z_perp x u_perp); the planar dot product is
    # z . u with the axis components removed.
    sin_term = ax * (-uy) + ay * ux
    cos_term = uz - za * ua
    return TiltResult(tilt_total, math.atan2(sin_term, cos_term), False)


def cup_tilt(pose: Pose) -> TiltResult:
    """Total and wrist-correctable tilt of the cup-up axis, radians."""
    return tilt_from_quat(pose.orientation)


def required_wrist_deviation(
        geom: ChainGeometry,
        q_proximal: tuple[float, float, float, float],
        theta_ref: float = 0.0,
        rom: tuple[float, float] = WRIST_ROM_DEFAULT) -> DeviationResult:
    """Wrist angle driving the correctable tilt to theta_ref, with clamping.

    The correctable tilt is additive in the wrist angle (the deviation
    rotation happens exactly about the decomposition axis), so the answer is
    theta_ref minus the tilt at zero deviation, clamped to the ROM.
    """
    q1, q2, q3, q4 = q_proximal
    fr = chain_frames(geom, q1, q2, q3, q4, 0.0)
    tilt = tilt_from_quat(fr.q_hand)
    angle = theta_ref - tilt.tilt_correctable
    lo, hi = rom
    if angle < lo:
        return DeviationResult(lo, True)
    if angle > hi:
        return DeviationResult(hi, True)
    return DeviationResult(angle, False)

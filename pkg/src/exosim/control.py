"""Control stack: wrist PID, resolved-rate arm control, leveling, safety.

The wrist runs position control: a PID whose output is a wrist speed
command (saturated at the wrist speed cap), realized by a velocity-mode
tendon driver that compensates spring, gravity, and capstan losses and
closes a proportional loop on wrist speed.  The proximal joints run
velocity control through damped-least-squares resolved-rate inverse
kinematics.  An outer proportional loop (auto-leveling) feeds setpoint
increments to the wrist PID so the correctable cup tilt tracks a reference
the operator may adjust on the fly.  A safety supervisor caps hand speed,
wrist speed, and blocks motion past the wrist range limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import actuation
from .arm_model import (ChainGeometry, JointConfig, Pose, WRIST_ROM_DEFAULT,
                        jacobian_columns)

HAND_SPEED_MAX_DEFAULT = 0.04   # m/s
WRIST_SPEED_MAX_DEFAULT = 0.2   # rad/s
DLS_LAMBDA = 0.01
# Proportional gain of the driver's internal wrist-speed loop, N m s/rad.
# Chosen with the default plant so the speed loop settles in tens of
# milliseconds while dt * gain / inertia stays well below stability limits.
DRIVE_GAIN = 0.12
# Time constant of the first-order filter on the PID derivative.  A raw
# one-tick difference with kd = 10 at 100 Hz has enough gain at the Nyquist
# frequency to sustain a saturation limit cycle; the filter removes it.
DERIV_FILTER_S = 0.04


@dataclass(frozen=True, slots=True)
class PidGains:
    kp: float = 100.0
    ki: float = 0.01
    kd: float = 10.0
    output_limit: float = WRIST_SPEED_MAX_DEFAULT

    def __post_init__(self) -> None:
        if self.output_limit <= 0.0:
            raise ValueError("output limit must be positive")


class PidState(NamedTuple):
    integral: float
    prev_measurement: float


def pid_init(measurement: float = 0.0) -> PidState:
    return PidState(0.0, measurement)


def pid_step(g: PidGains, st: PidState, setpoint: float, measurement: float,
             dt: float) -> tuple[float, PidState]:
    """One positional PID update; returns (command, next state).

    Derivative acts on the measurement (no setpoint kick) through a
    first-order filter; prev_measurement holds the filtered value.  The
    integral is clamped so its contribution alone can never exceed the
    output limit (anti-windup).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    error = setpoint - measurement
    integral = st.integral + error * dt
    if g.ki > 0.0:
        bound = g.output_limit / g.ki
        integral = min(bound, max(-bound, integral))
    beta = dt / (DERIV_FILTER_S + dt)
    filt = st.prev_measurement + beta * (measurement - st.prev_measurement)
    derivative = -(filt - st.prev_measurement) / dt
    out = g.kp * error + g.ki * integral + g.kd * derivative
    out = min(g.output_limit, max(-g.output_limit, out))
    return out, PidState(integral, filt)


def resolved_rate_from_columns(cols, vx: float, vy: float, vz: float,
                               lam: float = DLS_LAMBDA
                               ) -> tuple[float, float, float, float]:
    """Damped least squares on prebuilt Jacobian columns (float kernel)."""
    m00 = m01 = m02 = m11 = m12 = m22 = 0.0
    for cx, cy, cz in cols:
        m00 += cx * cx
        m01 += cx * cy
        m02 += cx * cz
        m11 += cy * cy
        m12 += cy * cz
        m22 += cz * cz
    lam2 = lam * lam
    m00 += lam2
    m11 += lam2
    m22 += lam2

    # Solve (J J^T + lam^2 I) u = v by the adjugate; the damping bounds the
    # smallest eigenvalue at lam^2 so the system is never singular.
    c00 = m11 * m22 - m12 * m12
    c01 = m02 * m12 - m01 * m22
    c02 = m01 * m12 - m02 * m11
    det = m00 * c00 + m01 * c01 + m02 * c02
    inv = 1.0 / det
    c11 = m00 * m22 - m02 * m02
    c12 = m01 * m02 - m00 * m12
    c22 = m00 * m11 - m01 * m01
    u0 = (c00 * vx + c01 * vy + c02 * vz) * inv
    u1 = (c01 * vx + c11 * vy + c12 * vz) * inv
    u2 = (c02 * vx + c12 * vy + c22 * vz) * inv

    return tuple(cx * u0 + cy * u1 + cz * u2 for cx, cy, cz in cols)


def resolved_rate(geom: ChainGeometry, q: JointConfig,
                  v_cmd) -> np.ndarray:
    """Proximal joint velocities realizing a hand velocity command."""
    vx, vy, vz = (float(v) for v in v_cmd)
    _, cols = jacobian_columns(geom, q.q_shoulder_fe, q.q_shoulder_ie,
                               q.q_elbow_fe, q.q_forearm_ps, q.q_wrist_dev)
    return np.array(resolved_rate_from_columns(cols, vx, vy, vz))


@dataclass(frozen=True, slots=True)
class SafetyLimits:
    hand_speed_max: float = HAND_SPEED_MAX_DEFAULT
    wrist_speed_max: float = WRIST_SPEED_MAX_DEFAULT
    wrist_rom: tuple[float, float] = WRIST_ROM_DEFAULT

    def __post_init__(self) -> None:
        if self.hand_speed_max <= 0.0 or self.wrist_speed_max <= 0.0:
            raise ValueError("speed caps must be positive")
        lo, hi = self.wrist_rom
        if not lo < hi:
            raise ValueError("wrist ROM must satisfy min < max")


class SafetyVerdict(NamedTuple):
    hand_v: tuple[float, float, float]
    wrist_v: float
    speed_flag: bool
    rom_flag: bool


def apply_safety(lim: SafetyLimits, q: JointConfig, hand_v_cmd,
                 wrist_v_cmd: float) -> SafetyVerdict:
    """Clamp commands to the safety envelope, flagging interventions.

    Hand velocity is rescaled (direction preserved) onto the speed cap;
    wrist velocity is clamped to the wrist cap and zeroed when it would push
    past the range-of-motion boundary the joint already sits on.
    """
    vx, vy, vz = (float(v) for v in hand_v_cmd)
    speed_flag = False
    norm = math.sqrt(vx * vx + vy * vy + vz * vz)
    if norm > lim.hand_speed_max:
        scale = lim.hand_speed_max / norm
        vx, vy, vz = vx * scale, vy * scale, vz * scale
        speed_flag = True

    wv = float(wrist_v_cmd)
    if abs(wv) > lim.wrist_speed_max:
        wv = math.copysign(lim.wrist_speed_max, wv)
        speed_flag = True

    rom_flag = False
    lo, hi = lim.wrist_rom
    if (q.q_wrist_dev >= hi and wv > 0.0) or (q.q_wrist_dev <= lo and wv < 0.0):
        wv = 0.0
        rom_flag = True

    return SafetyVerdict((vx, vy, vz), wv, speed_flag, rom_flag)


@dataclass(slots=True)
class LevelingConfig:
    """Auto-leveling outer loop; theta_ref is live state the user adjusts."""

    k_lev: float = 4.0
    theta_ref: float = 0.0
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.k_lev <= 0.0:
            raise ValueError("leveling gain must be positive")


def leveling_step(cfg: LevelingConfig, tilt_correctable: float,
                  user_theta_ref_delta: float = 0.0, dt: float = 0.01,
                  wrist_speed_max: float = WRIST_SPEED_MAX_DEFAULT) -> float:
    """Setpoint increment driving the correctable tilt toward theta_ref.

    The user delta is folded into theta_ref first (manual input and the
    leveler act in parallel), then a proportional increment is emitted,
    saturated so the implied wrist speed never exceeds the cap.
    """
    if not cfg.enabled:
        return 0.0
    cfg.theta_ref += user_theta_ref_delta
    inc = cfg.k_lev * (cfg.theta_ref - tilt_correctable) * dt
    cap = wrist_speed_max * dt
    return min(cap, max(-cap, inc))


def drive_tension(p: actuation.WristPlantParams, s: actuation.ClockSpring,
                  path: actuation.TendonPath, moment_arm: float,
                  rate_cmd: float, st: actuation.PlantState,
                  pose_context: Pose,
                  drive_gain: float = DRIVE_GAIN) -> float:
    """Velocity-mode tendon tension command (the motor-driver stand-in).

    Feeds forward the spring, gravity, and capstan losses, then closes a
    proportional loop on wrist speed.  Tension cannot push: adduction beyond
    the feedforward balance is left to the spring and gravity, which the
    pretension sizing guarantees can reach the adduction stop.
    """
    if s.pretension_tau0 is None:
        raise ValueError("spring pretension not sized; use default_spring")
    tau = (actuation.gravity_torque(p, pose_context, st.theta)
           + s.stiffness_si() * st.theta + s.pretension_tau0
           + drive_gain * (rate_cmd - st.theta_dot))
    if tau <= 0.0:
        return 0.0
    comp = math.exp(path.friction_mu * path.wrap_angle)
    return tau * comp / moment_arm
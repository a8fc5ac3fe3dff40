"""Wrist-joint plant: tendon transmission, return spring, and dynamics.

The joint is driven by a single tendon pulling toward abduction through a
Bowden housing (capstan friction losses), opposed by a clock spring and by
the gravitational moment of the hand-cup system.  The equation of motion is

    I * theta_ddot = tau_motor_eff + tau_spring - b * theta_dot - tau_grav

where tau_motor_eff is the delivered tension times the pulley moment arm and
tau_grav is the gravity load torque (positive when gravity pulls the hand
toward adduction, so subtracting it reproduces the physical moment).

Integration is semi-implicit Euler at the control tick: the linear spring
and damping terms are evaluated implicitly in the velocity update, which
keeps the stiff spring-damper stable at dt = 0.01 s and makes the passive
plant strictly dissipative; the position update uses the new velocity.
Hard stops clamp the angle to the configured ROM and zero the velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from . import quat
from .arm_model import Pose, POSE_IDENTITY, WRIST_ROM_DEFAULT, _col_y

GRAVITY_DEFAULT = 9.81


def nmm_per_deg_to_nm_per_rad(k_nmm_deg: float) -> float:
    """Convert a spring rate from N*mm/deg to N*m/rad in one place."""
    return k_nmm_deg * 1e-3 * (180.0 / math.pi)


@dataclass(frozen=True, slots=True)
class WristPlantParams:
    inertia_I: float = 0.0015          # kg m^2, documented assumption
    damping_b: float = 0.01            # N m s/rad, documented assumption
    hand_cup_mass: float = 0.5         # kg, documented assumption
    com_distance: float = 0.05         # m from wrist center along the fingers
    gravity: float = GRAVITY_DEFAULT

    def __post_init__(self) -> None:
        if self.inertia_I <= 0.0:
            raise ValueError("inertia must be positive")
        if self.damping_b < 0.0 or self.hand_cup_mass < 0.0 \
                or self.com_distance < 0.0:
            raise ValueError("damping, mass, and COM distance must be >= 0")


@dataclass(frozen=True, slots=True)
class TendonPath:
    friction_mu: float = 0.15
    wrap_angle: float = 0.70           # rad of cumulative housing wrap

    def __post_init__(self) -> None:
        if self.friction_mu < 0.0 or self.wrap_angle < 0.0:
            raise ValueError("friction and wrap angle must be >= 0")


@dataclass(frozen=True, slots=True)
class ClockSpring:
    """Spiral return spring; stiffness is stored in the catalog unit.

    A pretension of None marks a spring whose pretension has not been sized
    yet; use default_spring to compute it from the plant at startup.
    """

    stiffness_k_nmm_deg: float = 12.32
    pretension_tau0: float | None = None

    def __post_init__(self) -> None:
        if self.stiffness_k_nmm_deg <= 0.0:
            raise ValueError("spring stiffness must be positive")
        if self.pretension_tau0 is not None and self.pretension_tau0 < 0.0:
            raise ValueError("pretension must be >= 0")

    def stiffness_si(self) -> float:
        return nmm_per_deg_to_nm_per_rad(self.stiffness_k_nmm_deg)


class PlantState(NamedTuple):
    theta: float = 0.0
    theta_dot: float = 0.0
    at_stop: bool = False


def default_pretension(p: WristPlantParams, k_nmm_deg: float = 12.32,
                       abduction_max: float = WRIST_ROM_DEFAULT[1],
                       adduction_min: float = WRIST_ROM_DEFAULT[0],
                       margin: float = 0.05) -> float:
    """Pretension satisfying both passive-return requirements.

    Computed at startup rather than hard-coded: the spring torque at full
    abduction must exceed the static gravity load there (passive return),
    and the pretension must be large enough that gravity plus pretension can
    still pull the joint to full adduction against the wound-down spring
    when the tendon is slack.
    """
    k = nmm_per_deg_to_nm_per_rad(k_nmm_deg)
    mgd = p.hand_cup_mass * p.gravity * p.com_distance
    need_return = mgd * math.cos(abduction_max) - k * abduction_max + margin
    need_reach = k * (-adduction_min) - mgd * math.cos(adduction_min) + margin
    return max(margin, need_return, need_reach)


def default_spring(p: WristPlantParams,
                   k_nmm_deg: float = 12.32,
                   rom: tuple[float, float] = WRIST_ROM_DEFAULT) -> ClockSpring:
    """Spring at the rated stiffness with pretension sized for the ROM."""
    tau0 = default_pretension(p, k_nmm_deg, abduction_max=rom[1],
                              adduction_min=rom[0])
    return ClockSpring(k_nmm_deg, tau0)


def spring_torque(s: ClockSpring, theta: float) -> float:
    """Restoring torque, negative (toward adduction) at and above neutral."""
    if s.pretension_tau0 is None:
        raise ValueError("spring pretension not sized; use default_spring")
    return -(s.stiffness_si() * theta + s.pretension_tau0)


def capstan_transmit(t_in: float, path: TendonPath) -> float:
    """Tension delivered after friction losses along the wrapped housing."""
    if t_in < 0.0:
        raise ValueError("tendon tension must be >= 0")
    return t_in * math.exp(-path.friction_mu * path.wrap_angle)


def gravity_torque(p: WristPlantParams, pose_context: Pose = POSE_IDENTITY,
                   theta: float = 0.0) -> float:
    """Gravity load torque about the deviation axis.

    pose_context is the forearm (pre-wrist) frame at the wrist center; theta
    is the current wrist angle.  Returns the load the actuator must balance:
    positive when the weight of the hand-cup system pulls toward adduction.
    """
    q_fa = pose_context.orientation
    half = 0.5 * theta
    c, s = math.cos(half), math.sin(half)
    w, x, y, z = q_fa
    q_hand = (w * c + y * s, x * c + z * s, y * c - w * s, z * c - x * s)

    # COM offset r = d * (hand x axis); deviation axis a = forearm -y axis.
    hw, hx, hy, hz = q_hand
    rx = 1.0 - 2.0 * (hy * hy + hz * hz)
    ry = 2.0 * (hx * hy + hw * hz)
    ax, ay, az = _col_y(q_fa)

    # Load torque = -(r x F) . a with F = -m g z_world, which reduces to
    # m g d * (r x z) . (-a) = m g d * (r_x a_y - r_y a_x) with a negated.
    mgd = p.hand_cup_mass * p.gravity * p.com_distance
    return mgd * (rx * ay - ry * ax)


def required_torque(p: WristPlantParams, theta: float, theta_dot: float,
                    theta_ddot: float,
                    pose_context: Pose = POSE_IDENTITY) -> float:
    """Actuator torque needed to realize the given wrist motion."""
    if not all(math.isfinite(v) for v in (theta, theta_dot, theta_ddot)):
        raise ValueError("wrist state must be finite")
    return (p.inertia_I * theta_ddot + p.damping_b * theta_dot
            + gravity_torque(p, pose_context, theta))


def step_plant(p: WristPlantParams, s: ClockSpring, path: TendonPath,
               st: PlantState, motor_tension_cmd: float, moment_arm: float,
               dt: float, rom: tuple[float, float] = WRIST_ROM_DEFAULT,
               pose_context: Pose = POSE_IDENTITY) -> PlantState:
    """Advance the wrist plant one control tick.

    The velocity update treats the spring and damper implicitly (backward
    Euler on the linear terms), so the passive plant loses energy every step
    for any damping >= 0; motor and gravity torques are explicit.
    """
    if not 0.0 < dt <= 0.1:
        raise ValueError("dt must lie in (0, 0.1]")
    if s.pretension_tau0 is None:
        raise ValueError("spring pretension not sized; use default_spring")

    tau_mot = capstan_transmit(motor_tension_cmd, path) * moment_arm
    tau_grav = gravity_torque(p, pose_context, st.theta)
    k = s.stiffness_si()

    scale = dt / p.inertia_I
    num = st.theta_dot + scale * (tau_mot - tau_grav
                                  - k * st.theta - s.pretension_tau0)
    theta_dot = num / (1.0 + scale * (p.damping_b + dt * k))
    theta = st.theta + dt * theta_dot

    lo, hi = rom
    if theta <= lo:
        return PlantState(lo, 0.0, True)
    if theta >= hi:
        return PlantState(hi, 0.0, True)
    return PlantState(theta, theta_dot, False)

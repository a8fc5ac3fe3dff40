import math

import numpy as np
import pytest

from exosim import quat
from exosim.actuation import (ClockSpring, PlantState, TendonPath,
                              WristPlantParams, capstan_transmit,
                              default_pretension, default_spring,
                              gravity_torque, nmm_per_deg_to_nm_per_rad,
                              required_torque, spring_torque, step_plant)
from exosim.arm_model import Pose, POSE_IDENTITY, WRIST_ROM_DEFAULT

PARAMS = WristPlantParams()
SPRING = default_spring(PARAMS)
PATH = TendonPath()
ARM = 0.015  # m, pulley moment arm used throughout the tests
DT = 0.01


def test_spring_rate_unit_conversion():
    k = nmm_per_deg_to_nm_per_rad(12.32)
    assert abs(k - 0.70588400) < 1e-7
    # Round-trip back to the catalog unit.
    assert abs(k * math.pi / 180.0 * 1e3 - 12.32) < 1e-12


def test_capstan_exact_value():
    """mu*theta_w = ln(10/9) must deliver exactly 9 N from 10 N."""
    path = TendonPath(friction_mu=math.log(10.0 / 9.0) / 0.7, wrap_angle=0.7)
    assert abs(capstan_transmit(10.0, path) - 9.0) < 1e-9


def test_capstan_default_loss_fraction():
    loss = 1.0 - capstan_transmit(1.0, PATH)
    assert 0.08 <= loss <= 0.12


def test_capstan_properties():
    assert capstan_transmit(0.0, PATH) == 0.0
    assert capstan_transmit(5.0, PATH) < 5.0
    lossless = TendonPath(friction_mu=0.0, wrap_angle=0.7)
    assert capstan_transmit(5.0, lossless) == 5.0
    with pytest.raises(ValueError):
        capstan_transmit(-1.0, PATH)


def test_spring_torque_values():
    tau0 = SPRING.pretension_tau0
    assert spring_torque(SPRING, 0.0) == -tau0
    # 12.32 N*mm/deg means 123.2 N*mm of extra torque at +10 deg.
    extra = -spring_torque(SPRING, math.radians(10.0)) - tau0
    assert abs(extra - 0.1232) < 1e-12
    # Linearity in the angle.
    t1 = spring_torque(SPRING, 0.1) + tau0
    t2 = spring_torque(SPRING, 0.2) + tau0
    assert abs(t2 - 2.0 * t1) < 1e-15


def test_unsized_spring_rejected():
    bare = ClockSpring()
    with pytest.raises(ValueError):
        spring_torque(bare, 0.0)
    with pytest.raises(ValueError):
        step_plant(PARAMS, bare, PATH, PlantState(), 0.0, ARM, DT)


def test_pretension_reaches_full_adduction():
    """With a slack tendon, spring plus gravity must overcome the wound-down
    spring at the adduction limit; that condition sizes the pretension."""
    tau0 = default_pretension(PARAMS)
    k = SPRING.stiffness_si()
    lo = WRIST_ROM_DEFAULT[0]
    mgd = PARAMS.hand_cup_mass * PARAMS.gravity * PARAMS.com_distance
    # Net passive torque at the adduction stop is still adduction-ward.
    net = -(k * lo + tau0) - mgd * math.cos(lo)
    assert net <= -0.049
    # And at full abduction the passive plant heads back down.
    hi = WRIST_ROM_DEFAULT[1]
    net_hi = -(k * hi + tau0) - mgd * math.cos(hi)
    assert net_hi < 0.0


def test_gravity_torque_level_forearm():
    """Horizontal forearm, hand along +x: the full m*g*d moment pulls
    toward adduction."""
    assert abs(gravity_torque(PARAMS) - 0.24525) < 1e-12


def test_gravity_torque_follows_cosine_of_deviation():
    mgd = PARAMS.hand_cup_mass * PARAMS.gravity * PARAMS.com_distance
    for theta in (-0.6, -0.2, 0.0, 0.3, 0.5):
        tau = gravity_torque(PARAMS, POSE_IDENTITY, theta)
        assert abs(tau - mgd * math.cos(theta)) < 1e-12


def test_gravity_torque_vanishes_for_vertical_fingers():
    assert abs(gravity_torque(PARAMS, POSE_IDENTITY, math.pi / 2.0)) < 1e-12


def test_gravity_torque_pose_context():
    # Rolling the forearm 90 deg puts the deviation axis vertical; gravity
    # then has no moment about it.
    rolled = Pose((0.0, 0.0, 0.0),
                  quat.from_axis_angle((1.0, 0.0, 0.0), math.pi / 2.0))
    assert abs(gravity_torque(PARAMS, rolled, 0.0)) < 1e-12


def test_required_torque_terms():
    tau = required_torque(PARAMS, 0.0, 0.0, 0.0)
    assert abs(tau - 0.24525) < 1e-12
    tau_acc = required_torque(PARAMS, 0.0, 0.0, 2.0)
    assert abs(tau_acc - tau - 2.0 * PARAMS.inertia_I) < 1e-15
    with pytest.raises(ValueError):
        required_torque(PARAMS, float("nan"), 0.0, 0.0)


def test_step_plant_dt_validation():
    with pytest.raises(ValueError):
        step_plant(PARAMS, SPRING, PATH, PlantState(), 0.0, ARM, 0.0)
    with pytest.raises(ValueError):
        step_plant(PARAMS, SPRING, PATH, PlantState(), 0.0, ARM, 0.2)


def test_step_plant_deterministic():
    sa = sb = PlantState(0.1, 0.0, False)
    for i in range(200):
        tension = 10.0 + 3.0 * math.sin(0.05 * i)
        sa = step_plant(PARAMS, SPRING, PATH, sa, tension, ARM, DT)
        sb = step_plant(PARAMS, SPRING, PATH, sb, tension, ARM, DT)
        assert sa == sb


def test_step_plant_hits_abduction_stop():
    st = PlantState()
    for _ in range(600):
        st = step_plant(PARAMS, SPRING, PATH, st, 80.0, ARM, DT)
    assert st.at_stop
    assert st.theta == WRIST_ROM_DEFAULT[1]
    assert st.theta_dot == 0.0


def test_slack_tendon_falls_to_adduction_stop():
    st = PlantState()
    for _ in range(600):
        st = step_plant(PARAMS, SPRING, PATH, st, 0.0, ARM, DT)
    assert st.at_stop
    assert st.theta == WRIST_ROM_DEFAULT[0]


def test_zero_command_at_equilibrium_leaves_state_unchanged():
    p = WristPlantParams(hand_cup_mass=0.0)
    s = default_spring(PARAMS)
    eq = -s.pretension_tau0 / s.stiffness_si()
    st = step_plant(p, s, PATH, PlantState(eq, 0.0, False), 0.0, ARM, DT)
    assert abs(st.theta - eq) < 1e-12
    assert st.theta_dot == 0.0


def test_released_plant_velocity_envelope_decays():
    """Released from +20 deg with a slack tendon, each successive velocity
    peak of the damped oscillation is no larger than the last."""
    st = PlantState(math.radians(20.0), 0.0, False)
    wide = (-4.0, 4.0)
    peaks = []
    arc_peak = 0.0
    prev_sign = 0.0
    for _ in range(3000):
        st = step_plant(PARAMS, SPRING, PATH, st, 0.0, ARM, DT, rom=wide)
        sign = math.copysign(1.0, st.theta_dot) if st.theta_dot else 0.0
        if prev_sign and sign and sign != prev_sign:
            peaks.append(arc_peak)
            arc_peak = 0.0
        arc_peak = max(arc_peak, abs(st.theta_dot))
        if sign:
            prev_sign = sign
    assert len(peaks) >= 3
    for a, b in zip(peaks, peaks[1:]):
        assert b <= a * (1.0 + 1e-12)


def test_massless_plant_settles_at_spring_equilibrium():
    """Without the gravity load the slack-tendon rest angle is -tau0/k."""
    p = WristPlantParams(hand_cup_mass=0.0)
    s = default_spring(PARAMS)  # sized for the loaded plant, reused as-is
    st = PlantState()
    for _ in range(2000):
        st = step_plant(p, s, PATH, st, 0.0, ARM, DT)
    eq = -s.pretension_tau0 / s.stiffness_si()
    assert abs(st.theta - eq) < 1e-6
    assert not st.at_stop


def test_passive_plant_dissipates_energy():
    """Spring-mass energy never increases under the implicit update, for
    zero and nonzero damping alike."""
    rng = np.random.default_rng(21)
    for b in (0.0, 0.01):
        p = WristPlantParams(damping_b=b, hand_cup_mass=0.0)
        s = default_spring(PARAMS)
        k = s.stiffness_si()
        eq = -s.pretension_tau0 / k
        for _ in range(20):
            st = PlantState(rng.uniform(-0.5, 0.4), rng.uniform(-2.0, 2.0),
                            False)
            e_prev = 0.5 * p.inertia_I * st.theta_dot ** 2 \
                + 0.5 * k * (st.theta - eq) ** 2
            for _ in range(250):
                st = step_plant(p, s, PATH, st, 0.0, ARM, DT,
                                rom=(-10.0, 10.0))
                e = 0.5 * p.inertia_I * st.theta_dot ** 2 \
                    + 0.5 * k * (st.theta - eq) ** 2
                assert e <= e_prev * (1.0 + 1e-12)
                e_prev = e


def test_plant_parameter_validation():
    with pytest.raises(ValueError):
        WristPlantParams(inertia_I=0.0)
    with pytest.raises(ValueError):
        WristPlantParams(damping_b=-0.1)
    with pytest.raises(ValueError):
        TendonPath(friction_mu=-0.1)
    with pytest.raises(ValueError):
        ClockSpring(stiffness_k_nmm_deg=0.0)
    with pytest.raises(ValueError):
        ClockSpring(pretension_tau0=-1.0)

"""Seeded end-to-end task trials with 100 Hz logging.

Runs the full closed loop (scripted operator -> input mapping -> safety ->
resolved-rate arm motion plus the wrist leveling/PID/plant stack) for the
two functional tasks, classifies outcomes, randomizes condition schedules,
and round-trips trial logs through CSV plus a JSON sidecar.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import quat
from .actuation import (PlantState, TendonPath, WristPlantParams,
                        default_spring, step_plant)
from .arm_model import (ChainGeometry, JointConfig, Pose,
                        jacobian_columns, required_wrist_deviation,
                        tilt_from_quat)
from .control import (HAND_SPEED_MAX_DEFAULT, WRIST_SPEED_MAX_DEFAULT,
                      LevelingConfig, PidGains, SafetyLimits, apply_safety,
                      drive_tension, leveling_step, pid_init, pid_step,
                      resolved_rate_from_columns)
from .teleop import (POLICY_NOISE_SIGMA, PlanStep, PolicyState, SimSnapshot,
                     map_input, scripted_policy_step)

CONDITIONS = ("wrist_enabled", "wrist_locked")
TASK_KINDS = ("drinking", "scratch_level")
PHASES = ("approach", "grasp", "transport", "target_contact", "release")
EVENT_NAMES = ("grasp", "release", "spill_onset", "placement")
SPILL_OUTCOMES = ("spill", "no_spill", "n/a")
LEVELING_OUTCOMES = ("exo_only_success", "human_assisted", "not_leveled",
                     "grasp_failure", "n/a")

SCHEMA_VERSION = 1

# Tabletop scene in the world frame (floor origin, z up); the shoulder sits
# at BASE_POSITION.  Both objects are picked up from the same table spot.
BASE_POSITION = (0.10, -0.20, 0.95)
PICKUP_POSITION = (0.45, 0.10, 0.75)
MOUTH_POSITION = (0.15, 0.05, 1.30)
NOSE_POSITION = (0.15, 0.05, 1.35)
MARKER_POSITION = (0.40, -0.05, 0.75)
HOME_PROXIMAL_DEG = (50.0, 0.0, -30.0, 0.0)

# Dwell times the scripted operator holds at each labeled waypoint.
GRASP_DWELL_S = 0.3
CONTACT_DWELL_S = 0.5
RELEASE_DWELL_S = {"drinking": 0.2, "scratch_level": 0.3}

LOG_COLUMNS = (
    "t_s", "q_sh_fe_deg", "q_sh_ie_deg", "q_el_fe_deg", "q_fa_ps_deg",
    "q_wr_dev_deg", "grasp", "hand_x_m", "hand_y_m", "hand_z_m",
    "quat_w", "quat_x", "quat_y", "quat_z", "tilt_total_deg",
    "tilt_corr_deg", "theta_ref_deg", "cmd_vx", "cmd_vy", "cmd_vz",
    "cmd_ps", "cmd_dev", "flag_speed", "flag_rom",
)
_INT_COLUMNS = {"grasp", "flag_speed", "flag_rom"}
_ROW_FMT = ",".join("%d" if c in _INT_COLUMNS else "%.6f"
                    for c in LOG_COLUMNS)


class IngestError(ValueError):
    """A log file failed validation; the message names the row or field."""


class Waypoint(NamedTuple):
    phase: str
    position: tuple[float, float, float]


class TrialEvent(NamedTuple):
    name: str
    t: float


class LogRow(NamedTuple):
    t_s: float
    q_sh_fe_deg: float
    q_sh_ie_deg: float
    q_el_fe_deg: float
    q_fa_ps_deg: float
    q_wr_dev_deg: float
    grasp: int
    hand_x_m: float
    hand_y_m: float
    hand_z_m: float
    quat_w: float
    quat_x: float
    quat_y: float
    quat_z: float
    tilt_total_deg: float
    tilt_corr_deg: float
    theta_ref_deg: float
    cmd_vx: float
    cmd_vy: float
    cmd_vz: float
    cmd_ps: float
    cmd_dev: float
    flag_speed: int
    flag_rom: int


@dataclass(frozen=True, slots=True)
class TaskObject:
    """The manipulated object: a cup with a fill level or a stick."""

    kind: str
    fill_level: float | None = None
    length: float | None = None

    def __post_init__(self) -> None:
        if self.kind == "cup":
            if self.fill_level is None or not 0.0 <= self.fill_level <= 1.0:
                raise ValueError("cup fill_level must be in [0, 1]")
        elif self.kind == "stick":
            if self.length is None or self.length <= 0.0:
                raise ValueError("stick length must be positive")
        else:
            raise ValueError(f"unknown object kind {self.kind!r}")


@dataclass(frozen=True, slots=True)
class TaskSpec:
    kind: str
    waypoints: tuple[Waypoint, ...]
    obj: TaskObject

    def __post_init__(self) -> None:
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        if len(self.waypoints) < 2:
            raise ValueError("a task needs at least two waypoints")
        order = -1
        for wp in self.waypoints:
            if wp.phase not in PHASES:
                raise ValueError(f"unknown phase {wp.phase!r}")
            idx = PHASES.index(wp.phase)
            if idx < order:
                raise ValueError("waypoint phases out of canonical order")
            order = idx

    def waypoint(self, phase: str) -> Waypoint:
        for wp in self.waypoints:
            if wp.phase == phase:
                return wp
        raise ValueError(f"task has no {phase!r} waypoint")


def drinking_task(fill_level: float = 0.8) -> TaskSpec:
    """Pick up the cup, bring it to the mouth, drink, release."""
    wps = (Waypoint("approach", PICKUP_POSITION),
           Waypoint("grasp", PICKUP_POSITION),
           Waypoint("transport", MOUTH_POSITION),
           Waypoint("target_contact", MOUTH_POSITION),
           Waypoint("release", MOUTH_POSITION))
    return TaskSpec("drinking", wps, TaskObject("cup", fill_level=fill_level))


def scratch_task(length: float = 0.30) -> TaskSpec:
    """Pick up the stick, touch the nose, place it level on the marker."""
    wps = (Waypoint("approach", PICKUP_POSITION),
           Waypoint("grasp", PICKUP_POSITION),
           Waypoint("transport", NOSE_POSITION),
           Waypoint("target_contact", NOSE_POSITION),
           Waypoint("release", MARKER_POSITION))
    return TaskSpec("scratch_level", wps, TaskObject("stick", length=length))


@dataclass(frozen=True, slots=True)
class TrialConfig:
    participant_id: str
    condition: str
    seed: int
    rom_override: tuple[float, float] | None
    task: TaskSpec

    def __post_init__(self) -> None:
        if self.condition not in CONDITIONS:
            raise ValueError(f"unknown condition {self.condition!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        if self.rom_override is not None:
            lo, hi = self.rom_override
            if not lo < 0.0 < hi:
                raise ValueError("wrist ROM must bracket neutral (deg)")


@dataclass(frozen=True, slots=True)
class Outcome:
    spill: str = "n/a"
    leveling: str = "n/a"
    tct: float = 0.0
    timed_out: bool = False
    grip_failed: bool = False

    def __post_init__(self) -> None:
        if self.spill not in SPILL_OUTCOMES:
            raise ValueError(f"unknown spill outcome {self.spill!r}")
        if self.leveling not in LEVELING_OUTCOMES:
            raise ValueError(f"unknown leveling outcome {self.leveling!r}")
        if self.tct < 0.0:
            raise ValueError("completion time must be >= 0")


@dataclass(frozen=True, slots=True)
class SpillModel:
    """Tilt-threshold surrogate for the photographed spill judgment.

    A fuller cup spills at smaller tilt: the threshold relaxes linearly
    from psi_high_fill_deg at fill_high to psi_low_fill_deg at fill_low,
    and a spill requires the threshold exceeded continuously for dwell_s.
    """

    psi_high_fill_deg: float = 15.0
    psi_low_fill_deg: float = 25.0
    fill_high: float = 0.8
    fill_low: float = 0.2
    dwell_s: float = 0.1

    def threshold_deg(self, fill_level: float) -> float:
        f = min(self.fill_high, max(self.fill_low, fill_level))
        frac = (self.fill_high - f) / (self.fill_high - self.fill_low)
        return (self.psi_high_fill_deg
                + (self.psi_low_fill_deg - self.psi_high_fill_deg) * frac)


_DEFAULT_GEOMETRY = ChainGeometry(base_pose=Pose(BASE_POSITION, quat.IDENTITY))


@dataclass(frozen=True, slots=True)
class TrialEnv:
    """Everything a trial needs beyond its TrialConfig; all defaults tuned
    so the default tasks complete well inside the safety envelope."""

    geometry: ChainGeometry = _DEFAULT_GEOMETRY
    plant: WristPlantParams = WristPlantParams()
    tendon: TendonPath = TendonPath()
    spring_k_nmm_deg: float = 12.32
    moment_arm_m: float = 0.015
    hand_speed_max: float = HAND_SPEED_MAX_DEFAULT
    wrist_speed_max: float = WRIST_SPEED_MAX_DEFAULT
    pid_gains: PidGains = PidGains()
    k_lev: float = 4.0
    dt: float = 0.01
    timeout_s: float = 60.0
    home_proximal_deg: tuple[float, float, float, float] = HOME_PROXIMAL_DEG
    pace: float = 1.0
    noise_sigma: float = POLICY_NOISE_SIGMA
    spill: SpillModel = SpillModel()
    leveling_tolerance_deg: float = 5.0
    marker_radius_m: float = 0.03
    grip_capacity: float = 1.0
    grip_fail_prob: float = 0.75
    scratch_theta_ref_deg: float = 15.0


DEFAULT_ENV = TrialEnv()


@dataclass(frozen=True, slots=True)
class Participant:
    participant_id: str
    rom_deg: tuple[float, float] = (-40.0, 30.0)


def default_participants(n: int = 8) -> tuple[Participant, ...]:
    return tuple(Participant(f"P{i + 1}") for i in range(n))


@dataclass(frozen=True)
class TrialRecord:
    config: TrialConfig
    samples: tuple[LogRow, ...]
    events: tuple[TrialEvent, ...]
    outcome: Outcome

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("a trial record needs at least one sample")
        prev = self.samples[0].t_s
        for row in self.samples[1:]:
            if row.t_s <= prev:
                raise ValueError("sample timestamps must strictly increase")
            prev = row.t_s
        n = len(self.samples)
        if n > 1:
            mean_dt = (self.samples[-1].t_s - self.samples[0].t_s) / (n - 1)
            if abs(mean_dt - 0.01) > 0.0001:
                raise ValueError("mean sample period must be 0.01 s +- 1%")
        held = False
        for ev in sorted(self.events, key=lambda e: e.t):
            if ev.name not in EVENT_NAMES:
                raise ValueError(f"unknown event {ev.name!r}")
            if ev.name == "grasp":
                held = True
            elif ev.name == "release" and not held:
                raise ValueError("release event without a preceding grasp")
        if self.config.task.kind == "drinking":
            if self.outcome.leveling != "n/a":
                raise ValueError("leveling outcome applies to scratch trials")
        elif self.outcome.spill != "n/a":
            raise ValueError("spill outcome applies to drinking trials")

    def event_time(self, name: str) -> float | None:
        for ev in self.events:
            if ev.name == name:
                return ev.t
        return None


def _object_load(obj: TaskObject) -> float:
    if obj.kind == "cup":
        return 0.3 + 0.2 * obj.fill_level
    return 2.0 * obj.length


def _plan_for(task: TaskSpec, theta_ref_scratch: float) -> tuple[PlanStep, ...]:
    steps = []
    for wp in task.waypoints:
        dwell, event, tref = 0.0, "none", 0.0
        if wp.phase == "grasp":
            dwell, event = GRASP_DWELL_S, "grasp"
        elif wp.phase == "target_contact":
            dwell = CONTACT_DWELL_S
        elif wp.phase == "release":
            dwell, event = RELEASE_DWELL_S[task.kind], "release"
        if task.kind == "scratch_level" \
                and wp.phase in ("transport", "target_contact"):
            tref = theta_ref_scratch
        steps.append(PlanStep(wp.phase, wp.position, dwell, event, tref))
    return tuple(steps)


def _check_reachable(task: TaskSpec, env: TrialEnv) -> None:
    g = env.geometry
    base = g.base_pose.position
    outer = g.upper_arm_len + g.forearm_len + g.hand_len
    inner = abs(g.upper_arm_len - (g.forearm_len + g.hand_len))
    for i, wp in enumerate(task.waypoints):
        d = math.dist(base, wp.position)
        if not inner + 1e-9 < d < outer - 1e-9:
            raise ValueError(
                f"waypoint {i} ({wp.phase}) at {wp.position} is unreachable")


def _rom_radians(cfg: TrialConfig) -> tuple[float, float]:
    if cfg.rom_override is None:
        return (math.radians(-40.0), math.radians(30.0))
    lo, hi = cfg.rom_override
    return (math.radians(lo), math.radians(hi))


def _r6(v: float) -> float:
    # pre-round so the 6-decimal CSV round-trips to identical floats
    return round(v, 6)


class _WristStack:
    """Per-condition wrist state while conditions share one arm pass."""

    __slots__ = ("cfg", "enabled", "st", "pid", "setpoint", "lev", "samples")

    def __init__(self, cfg: TrialConfig, theta0: float, k_lev: float):
        self.cfg = cfg
        self.enabled = cfg.condition == "wrist_enabled"
        theta0 = theta0 if self.enabled else 0.0
        self.st = PlantState(theta0, 0.0, False)
        self.pid = pid_init(theta0)
        self.setpoint = theta0
        self.lev = LevelingConfig(k_lev=k_lev, theta_ref=0.0,
                                  enabled=self.enabled)
        self.samples: list[LogRow] = []


def run_trial(cfg: TrialConfig, env: TrialEnv = DEFAULT_ENV) -> TrialRecord:
    """Execute one trial at 100 Hz until the plan completes or 60 s."""
    return _run_conditions((cfg,), env)[0]


def run_trial_pair(cfg_a: TrialConfig, cfg_b: TrialConfig,
                   env: TrialEnv = DEFAULT_ENV
                   ) -> tuple[TrialRecord, TrialRecord]:
    """Run a matched enabled/locked seed pair in one simulation pass.

    The arm is steered through the wrist-independent hand reference point,
    so twin conditions share their proximal trajectory exactly; simulating
    them together nearly halves suite cost while producing records
    byte-identical to running each config alone.
    """
    matched = (cfg_a.participant_id == cfg_b.participant_id
               and cfg_a.seed == cfg_b.seed and cfg_a.task == cfg_b.task
               and cfg_a.rom_override == cfg_b.rom_override)
    if not matched or {cfg_a.condition, cfg_b.condition} != set(CONDITIONS):
        raise ValueError("a trial pair must differ only in condition")
    recs = _run_conditions((cfg_a, cfg_b), env)
    return recs[0], recs[1]


def pair_schedule(configs):
    """Group configs into matched condition twins, keeping leftovers single.

    Returns tuples of one or two configs in first-appearance order; feeding
    the pairs to run_trial_pair reproduces per-config run_trial output.
    """
    pending: dict = {}
    groups: list[list[TrialConfig]] = []
    for cfg in configs:
        key = (cfg.participant_id, cfg.seed, cfg.task, cfg.rom_override)
        group = pending.get(key)
        if group is not None and group[0].condition != cfg.condition:
            group.append(cfg)
            del pending[key]
        else:
            group = [cfg]
            groups.append(group)
            pending[key] = group
    return [tuple(g) for g in groups]


def _run_conditions(cfgs, env: TrialEnv) -> list[TrialRecord]:
    task = cfgs[0].task
    _check_reachable(task, env)
    rom = _rom_radians(cfgs[0])
    lo, hi = rom
    geom = env.geometry
    plant = env.plant
    path = env.tendon
    arm = env.moment_arm_m
    dt = env.dt
    spring = default_spring(plant, env.spring_k_nmm_deg, rom)
    lim = SafetyLimits(env.hand_speed_max, env.wrist_speed_max, rom)
    gains = env.pid_gains

    q1, q2, q3, q4 = (math.radians(v) for v in env.home_proximal_deg)
    # start the wrist on the leveling solution so there is no initial step
    w0 = required_wrist_deviation(geom, (q1, q2, q3, q4), 0.0, rom).angle
    stacks = tuple(_WristStack(cfg, w0, env.k_lev) for cfg in cfgs)
    lead = next((s for s in stacks if s.enabled), None)

    pol_seq, grip_seq = np.random.SeedSequence(cfgs[0].seed).spawn(2)
    rng = np.random.default_rng(pol_seq)
    grip_rng = np.random.default_rng(grip_seq)
    plan = _plan_for(task, math.radians(env.scratch_theta_ref_deg))
    ps = PolicyState(plan=plan, pace=env.pace, noise_sigma=env.noise_sigma,
                     wrist_active=lead is not None)
    load = _object_load(task.obj)
    overloaded = load > env.grip_capacity

    deg = math.degrees
    events: list[TrialEvent] = []
    held = 0
    grip_failed = False
    max_ticks = int(round(env.timeout_s / dt))
    for k in range(max_ticks + 1):
        t = k * dt
        fr, cols = jacobian_columns(geom, q1, q2, q3, q4, 0.0)
        qf = fr.q_forearm
        roll = 2.0 * (qf[2] * qf[3] + qf[0] * qf[1])
        snap = SimSnapshot(t, fr.p_hand, roll,
                           lead.lev.theta_ref if lead is not None else 0.0)
        cmd = scripted_policy_step(ps, snap, rng)
        m = map_input(cmd, lim)

        ticks = []
        for s in stacks:
            if s.enabled:
                theta = s.st.theta
                half = -0.5 * theta
                q_hand = quat.mul(qf, (math.cos(half), 0.0,
                                       math.sin(half), 0.0))
            else:
                theta = 0.0
                q_hand = qf
            tl = tilt_from_quat(q_hand)
            wrist_cmd = 0.0
            if s.enabled:
                inc = leveling_step(s.lev, tl.tilt_correctable,
                                    m.wrist_dev_v * dt, dt,
                                    env.wrist_speed_max)
                s.setpoint = min(hi, max(lo, s.setpoint + inc))
                wrist_cmd, s.pid = pid_step(gains, s.pid, s.setpoint,
                                            s.st.theta, dt)
            q_now = JointConfig(q1, q2, q3, q4, theta, float(held))
            ver = apply_safety(lim, q_now, m.hand_v, wrist_cmd)
            ticks.append((theta, q_hand, tl, ver))
        vx, vy, vz = ticks[0][3].hand_v
        rr = resolved_rate_from_columns(cols, vx, vy, vz)

        if cmd.grasp_event == "grasp":
            events.append(TrialEvent("grasp", _r6(t)))
            held = 1
            if overloaded and grip_rng.random() < env.grip_fail_prob:
                grip_failed = True
                held = 0
        elif cmd.grasp_event == "release":
            events.append(TrialEvent("release", _r6(t)))
            if task.kind == "scratch_level":
                events.append(TrialEvent("placement", _r6(t)))
            held = 0

        px, py, pz = fr.p_hand
        for s, (theta, q_hand, tl, ver) in zip(stacks, ticks):
            s.samples.append(LogRow(
                t, deg(q1), deg(q2), deg(q3), deg(q4), deg(theta), held,
                px, py, pz, q_hand[0], q_hand[1], q_hand[2], q_hand[3],
                deg(tl.tilt_total), deg(tl.tilt_correctable),
                deg(s.lev.theta_ref), ver.hand_v[0], ver.hand_v[1],
                ver.hand_v[2], deg(m.wrist_ps_v), deg(ver.wrist_v),
                int(ver.speed_flag), int(ver.rom_flag)))

        if ps.done or grip_failed:
            break
        pose_fa = None
        for s, (theta, q_hand, tl, ver) in zip(stacks, ticks):
            if s.enabled:
                if pose_fa is None:
                    pose_fa = Pose(fr.p_wrist, quat.normalize(qf))
                tension = drive_tension(plant, spring, path, arm,
                                        ver.wrist_v, s.st, pose_fa)
                s.st = step_plant(plant, spring, path, s.st, tension, arm,
                                  dt, rom, pose_fa)
        q1 += dt * rr[0]
        q2 += dt * rr[1]
        q3 += dt * rr[2]
        q4 += dt * (rr[3] + m.wrist_ps_v)

    timed_out = not (ps.done or grip_failed)
    records = []
    for s in stacks:
        spill, leveling, evs = "n/a", "n/a", list(events)
        if task.kind == "drinking":
            spill, onset = _spill_scan(task, s.samples, events, env.spill)
            if onset is not None:
                evs.append(TrialEvent("spill_onset", _r6(onset)))
                evs.sort(key=lambda e: e.t)
        else:
            leveling = _leveling_scan(task, s.samples, events, grip_failed,
                                      env.leveling_tolerance_deg,
                                      env.marker_radius_m)
        tct, _ = _completion_span(s.samples, evs)
        outcome = Outcome(spill, leveling, tct, timed_out, grip_failed)
        records.append(TrialRecord(s.cfg, tuple(s.samples), tuple(evs),
                                   outcome))
    return records


_CMD_SLICE = slice(LOG_COLUMNS.index("cmd_vx"), LOG_COLUMNS.index("cmd_dev") + 1)


def _completion_span(samples, events) -> tuple[float, bool]:
    first_cmd = samples[0].t_s
    for row in samples:
        if any(v != 0.0 for v in row[_CMD_SLICE]):
            first_cmd = row.t_s
            break
    terminal = None
    for ev in events:
        if ev.name in ("release", "placement"):
            terminal = ev.t if terminal is None else max(terminal, ev.t)
    if terminal is None:
        return _r6(samples[-1].t_s - first_cmd), True
    return _r6(terminal - first_cmd), False


def _spill_scan(task, samples, events, model: SpillModel):
    t_grasp = next((e.t for e in events if e.name == "grasp"), None)
    if t_grasp is None:
        return "no_spill", None
    t_release = next((e.t for e in events if e.name == "release"),
                     samples[-1].t_s)
    psi = model.threshold_deg(task.obj.fill_level)
    run_start = None
    for row in samples:
        if t_grasp <= row.t_s <= t_release and row.tilt_total_deg > psi:
            if run_start is None:
                run_start = row.t_s
            if row.t_s - run_start >= model.dwell_s - 1e-9:
                return "spill", run_start
        else:
            run_start = None
    return "no_spill", None


def _leveling_scan(task, samples, events, grip_failed, tolerance_deg,
                   marker_radius_m):
    if grip_failed:
        return "grasp_failure"
    t_place = next((e.t for e in events if e.name == "placement"), None)
    if t_place is None:
        return "not_leveled"
    row = min(samples, key=lambda r: abs(r.t_s - t_place))
    mx, my, _ = task.waypoint("release").position
    on_marker = math.hypot(row.hand_x_m - mx, row.hand_y_m - my) \
        <= marker_radius_m
    if row.tilt_total_deg <= tolerance_deg and on_marker:
        return "exo_only_success"
    return "not_leveled"


def classify_spill(rec: TrialRecord,
                   spill_model: SpillModel | None = None) -> str:
    """Spill verdict for a drinking trial under the tilt-threshold model."""
    if rec.config.task.kind != "drinking":
        raise ValueError("spill classification applies to drinking trials")
    model = spill_model if spill_model is not None else DEFAULT_ENV.spill
    verdict, _ = _spill_scan(rec.config.task, rec.samples, rec.events, model)
    return verdict


def classify_leveling(rec: TrialRecord, tolerance_deg: float = 5.0,
                      marker_radius_m: float = 0.03) -> str:
    """Placement verdict for a scratch trial (tilt and marker position)."""
    if rec.config.task.kind != "scratch_level":
        raise ValueError("leveling classification applies to scratch trials")
    return _leveling_scan(rec.config.task, rec.samples, rec.events,
                          rec.outcome.grip_failed, tolerance_deg,
                          marker_radius_m)


def randomize_schedule(participants, seed: int, tasks=None,
                       trials_per_condition: int = 4) -> list[TrialConfig]:
    """Blocked per-participant schedule with a seeded condition order.

    The same per-trial seeds are reused across the two conditions of a
    (participant, task) block, so paired comparisons see matched operator
    noise rather than an extra between-condition noise term.
    """
    participants = list(participants)
    if not participants:
        raise ValueError("schedule needs at least one participant")
    if tasks is None:
        tasks = (drinking_task(), scratch_task())
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    configs = []
    for part in participants:
        first = CONDITIONS[0] if rng.random() < 0.5 else CONDITIONS[1]
        second = CONDITIONS[1] if first == CONDITIONS[0] else CONDITIONS[0]
        for task in tasks:
            trial_seeds = [int(s) for s in
                           rng.integers(0, 2 ** 63, size=trials_per_condition)]
            for cond in (first, second):
                for ts in trial_seeds:
                    configs.append(TrialConfig(part.participant_id, cond, ts,
                                               part.rom_deg, task))
    return configs


def _task_to_dict(task: TaskSpec) -> dict:
    obj: dict = {"kind": task.obj.kind}
    if task.obj.fill_level is not None:
        obj["fill_level"] = task.obj.fill_level
    if task.obj.length is not None:
        obj["length"] = task.obj.length
    return {"kind": task.kind,
            "waypoints": [{"phase": wp.phase, "position": list(wp.position)}
                          for wp in task.waypoints],
            "object": obj}


def _task_from_dict(d: dict) -> TaskSpec:
    obj = TaskObject(d["object"]["kind"], d["object"].get("fill_level"),
                     d["object"].get("length"))
    wps = tuple(Waypoint(w["phase"], tuple(float(c) for c in w["position"]))
                for w in d["waypoints"])
    return TaskSpec(d["kind"], wps, obj)


def write_log(rec: TrialRecord, path) -> None:
    """CSV samples plus a JSON sidecar; both byte-deterministic."""
    path = Path(path)
    lines = [",".join(LOG_COLUMNS)]
    lines.extend(_ROW_FMT % row for row in rec.samples)
    path.write_text("\n".join(lines) + "\n")
    cfg = rec.config
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "config": {
            "participant_id": cfg.participant_id,
            "condition": cfg.condition,
            "seed": cfg.seed,
            "rom_override": list(cfg.rom_override)
            if cfg.rom_override is not None else None,
            "task": _task_to_dict(cfg.task),
        },
        "events": [{"name": e.name, "t": e.t} for e in rec.events],
        "outcome": {
            "spill": rec.outcome.spill,
            "leveling": rec.outcome.leveling,
            "tct": rec.outcome.tct,
            "timed_out": rec.outcome.timed_out,
            "grip_failed": rec.outcome.grip_failed,
        },
    }
    path.with_suffix(".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def read_log(path) -> TrialRecord:
    """Ingest a CSV/sidecar pair, validating schema and monotone time."""
    path = Path(path)
    sidecar_path = path.with_suffix(".json")
    if not sidecar_path.exists():
        raise IngestError(f"missing sidecar {sidecar_path.name}")
    try:
        sidecar = json.loads(sidecar_path.read_text())
    except json.JSONDecodeError as exc:
        raise IngestError(f"sidecar {sidecar_path.name}: {exc}") from exc
    version = sidecar.get("schema_version")
    if version != SCHEMA_VERSION:
        raise IngestError(f"field 'schema_version': expected "
                          f"{SCHEMA_VERSION}, found {version}")
    c = sidecar["config"]
    rom = c.get("rom_override")
    cfg = TrialConfig(c["participant_id"], c["condition"], c["seed"],
                      tuple(rom) if rom is not None else None,
                      _task_from_dict(c["task"]))

    lines = path.read_text().splitlines()
    if not lines:
        raise IngestError("log file is empty")
    header = lines[0].split(",")
    for name in LOG_COLUMNS:
        if name not in header:
            raise IngestError(f"missing required column '{name}'")
    if header != list(LOG_COLUMNS):
        raise IngestError("columns out of order; see documented schema")
    t_idx = LOG_COLUMNS.index("t_s")
    samples = []
    prev_t = -math.inf
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split(",")
        if len(parts) != len(LOG_COLUMNS):
            raise IngestError(f"row {i}: expected {len(LOG_COLUMNS)} fields, "
                              f"found {len(parts)}")
        values = []
        for name, text in zip(LOG_COLUMNS, parts):
            try:
                v = float(text)
            except ValueError:
                raise IngestError(
                    f"row {i}: field '{name}' is not numeric") from None
            values.append(int(v) if name in _INT_COLUMNS else v)
        if values[t_idx] <= prev_t:
            raise IngestError(f"row {i}: field 't_s' does not increase")
        if prev_t > -math.inf and not 0.005 <= values[t_idx] - prev_t <= 0.015:
            raise IngestError(f"row {i}: field 't_s' gaps from the "
                              f"100 Hz sample schedule")
        prev_t = values[t_idx]
        samples.append(LogRow(*values))
    events = tuple(TrialEvent(e["name"], float(e["t"]))
                   for e in sidecar.get("events", ()))
    o = sidecar["outcome"]
    outcome = Outcome(o["spill"], o["leveling"], float(o["tct"]),
                      bool(o["timed_out"]), bool(o["grip_failed"]))
    try:
        return TrialRecord(cfg, tuple(samples), events, outcome)
    except ValueError as exc:
        raise IngestError(str(exc)) from exc

"""Operator command model, wire protocol, and the scripted operator.

Commands arrive as normalized gamepad-style axes in [-1, 1] plus grasp
events; map_input applies a deadzone and scales full deflection onto the
safety caps.  The wire protocol is newline-delimited JSON with strictly
increasing per-direction sequence numbers and a tolerant reader (unknown
payload fields are preserved, never fatal).

The scripted policy stands in for the human operator in headless trials:
it servos the hand toward the current plan step's waypoint, steers forearm
rotation to keep the proximal roll component level (as an operator watching
the cup would), nudges the leveling reference toward per-phase targets when
the wrist is available, and perturbs every axis with seeded Gaussian noise
to emulate operator variability.  The noise stream is consumed identically
in both experimental conditions so paired trials share their random draws.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .control import SafetyLimits, WRIST_SPEED_MAX_DEFAULT

DEADZONE = 0.05
POLICY_NOISE_SIGMA = 0.05
ARRIVE_RADIUS = 0.005          # m; waypoint arrival threshold
APPROACH_RAMP = 0.015          # m; deflection ramps down over this span
MIN_APPROACH_DEFLECTION = 0.1
ROLL_STEER_GAIN = 20.0         # normalized deflection per rad of roll
THETA_REF_GAIN = 2.0           # 1/s drive of the leveling reference
STALENESS_S = 0.2              # live commands older than this decay to zero
PROTOCOL_VERSION = 1
DEFAULT_PORT = 8571
PORT_ENV_VAR = "EXOSIM_PORT"

MESSAGE_KINDS = ("hello", "command", "state", "event", "error")
GRASP_EVENTS = ("none", "grasp", "release")


@dataclass(frozen=True, slots=True)
class OperatorCommand:
    v_xy: tuple[float, float] = (0.0, 0.0)
    v_z: float = 0.0
    wrist_ps_vel: float = 0.0
    wrist_dev_vel: float = 0.0
    grasp_event: str = "none"
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if self.grasp_event not in GRASP_EVENTS:
            raise ValueError(f"unknown grasp event {self.grasp_event!r}")


class MappedCommand(NamedTuple):
    hand_v: tuple[float, float, float]
    wrist_ps_v: float
    wrist_dev_v: float
    grasp_event: str


def _axis(value: float, cap: float) -> float:
    v = float(value)
    if not -1.0 <= v <= 1.0:
        raise ValueError(f"normalized axis {v} outside [-1, 1]")
    if abs(v) < DEADZONE:
        return 0.0
    return v * cap


def map_input(raw: OperatorCommand, lim: SafetyLimits) -> MappedCommand:
    """Deadzone plus linear scaling of normalized axes onto the caps."""
    hx = _axis(raw.v_xy[0], lim.hand_speed_max)
    hy = _axis(raw.v_xy[1], lim.hand_speed_max)
    hz = _axis(raw.v_z, lim.hand_speed_max)
    ps = _axis(raw.wrist_ps_vel, lim.wrist_speed_max)
    dev = _axis(raw.wrist_dev_vel, lim.wrist_speed_max)
    return MappedCommand((hx, hy, hz), ps, dev, raw.grasp_event)


class ProtocolError(Exception):
    def __init__(self, code: str, text: str):
        super().__init__(f"{code}: {text}")
        self.code = code
        self.text = text


@dataclass(frozen=True, slots=True)
class WireMessage:
    kind: str
    payload: dict
    seq: int


def encode_message(m: WireMessage) -> bytes:
    """One JSON object per line, UTF-8, keys sorted for stable bytes."""
    if m.kind not in MESSAGE_KINDS:
        raise ProtocolError("bad-kind", f"unknown message kind {m.kind!r}")
    body = dict(m.payload)
    body["kind"] = m.kind
    body["seq"] = m.seq
    return (json.dumps(body, sort_keys=True,
                       separators=(",", ":")) + "\n").encode("utf-8")


def decode_message(line: bytes | str) -> WireMessage:
    """Parse one wire line; unknown payload fields are kept, not rejected."""
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="replace")
    try:
        body = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError("bad-json", f"malformed line: {exc}") from exc
    if not isinstance(body, dict):
        raise ProtocolError("bad-json", "message must be a JSON object")
    kind = body.pop("kind", None)
    if kind not in MESSAGE_KINDS:
        raise ProtocolError("bad-kind", f"unknown message kind {kind!r}")
    seq = body.pop("seq", None)
    if not isinstance(seq, int):
        raise ProtocolError("bad-seq", "seq must be an integer")
    return WireMessage(kind, body, seq)


class SequencedReader:
    """Decodes a message stream, enforcing strictly increasing seq."""

    def __init__(self) -> None:
        self.last_seq = -1

    def decode(self, line: bytes | str) -> WireMessage:
        msg = decode_message(line)
        if msg.seq <= self.last_seq:
            raise ProtocolError(
                "bad-seq", f"seq {msg.seq} not above {self.last_seq}")
        self.last_seq = msg.seq
        return msg


@dataclass(frozen=True, slots=True)
class PlanStep:
    """One leg of a task plan executed by the scripted operator."""

    label: str
    target: tuple[float, float, float]
    dwell_s: float = 0.0
    grasp_event: str = "none"
    theta_ref_target: float = 0.0


@dataclass(slots=True)
class PolicyState:
    plan: tuple[PlanStep, ...]
    pace: float = 1.0
    noise_sigma: float = POLICY_NOISE_SIGMA
    wrist_active: bool = True
    idx: int = 0
    dwell_left: float = 0.0
    awaiting_dwell: bool = False
    done: bool = False


class SimSnapshot(NamedTuple):
    """What the scripted operator can see.

    hand_ref is the wrist-independent hand reference point (the operator
    steers the forearm); roll_residual is the proximal-only roll of the cup
    axis about the forearm long axis, the part forearm rotation can fix.
    """

    t: float
    hand_ref: tuple[float, float, float]
    roll_residual: float
    theta_ref: float


def _clip(v: float) -> float:
    return -1.0 if v < -1.0 else (1.0 if v > 1.0 else v)


def scripted_policy_step(ps: PolicyState, snap: SimSnapshot,
                         rng) -> OperatorCommand:
    """One operator decision: returns the normalized command for this tick.

    Consumes exactly five Gaussian draws from rng per call regardless of
    condition or phase, so paired runs stay on common random numbers.
    """
    noise = rng.normal(0.0, ps.noise_sigma, 5) if ps.noise_sigma > 0.0 \
        else (0.0,) * 5

    grasp_event = "none"
    tx = ty = tz = 0.0
    theta_target = 0.0
    if not ps.done:
        step = ps.plan[ps.idx]
        theta_target = step.theta_ref_target
        hx, hy, hz = snap.hand_ref
        dx = step.target[0] - hx
        dy = step.target[1] - hy
        dz = step.target[2] - hz
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)

        if ps.awaiting_dwell:
            ps.dwell_left -= 1.0
            if ps.dwell_left <= 0.0:
                ps.awaiting_dwell = False
                grasp_event = step.grasp_event
                if ps.idx + 1 < len(ps.plan):
                    ps.idx += 1
                else:
                    ps.done = True
        elif dist <= ARRIVE_RADIUS:
            if step.dwell_s > 0.0:
                ps.awaiting_dwell = True
                ps.dwell_left = round(step.dwell_s * 100.0)
            else:
                grasp_event = step.grasp_event
                if ps.idx + 1 < len(ps.plan):
                    ps.idx += 1
                else:
                    ps.done = True
        else:
            deflection = (dist - ARRIVE_RADIUS) / APPROACH_RAMP
            deflection = max(MIN_APPROACH_DEFLECTION, min(1.0, deflection))
            scale = deflection * ps.pace / dist
            tx, ty, tz = dx * scale, dy * scale, dz * scale

    ps_cmd = -ROLL_STEER_GAIN * snap.roll_residual
    dev_cmd = 0.0
    if ps.wrist_active:
        dev_cmd = THETA_REF_GAIN * (theta_target - snap.theta_ref) \
            / WRIST_SPEED_MAX_DEFAULT

    cmd = OperatorCommand(
        (_clip(tx + noise[0]), _clip(ty + noise[1])),
        _clip(tz + noise[2]),
        _clip(ps_cmd + noise[3]),
        _clip(dev_cmd + noise[4]) if ps.wrist_active else 0.0,
        grasp_event,
        snap.t)
    return cmd

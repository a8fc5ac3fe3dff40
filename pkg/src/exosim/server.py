"""Live teleoperation server and recorded-log replay.

One operator connection at a time drives the simulation over
newline-delimited JSON WebSocket messages.  The simulation ticks on its
own thread at a wall-clock 100 Hz; network I/O never blocks it.  Incoming
commands pass through a queue that is never dropped, state broadcasts go
through a bounded drop-oldest buffer at the decimation negotiated in the
hello exchange, an emergency stop freezes every joint within one tick,
and 200 ms of command silence decays the applied velocities to zero.
"""

from __future__ import annotations

import math
import os
import threading
import time
from collections import deque
from queue import Empty, Queue
from pathlib import Path

from websockets.exceptions import ConnectionClosed
from websockets.sync.server import serve as ws_serve

from . import quat
from .actuation import PlantState, default_spring, step_plant
from .arm_model import JointConfig, Pose, jacobian_columns, \
    required_wrist_deviation, tilt_from_quat
from .control import (LevelingConfig, SafetyLimits, apply_safety,
                      drive_tension, leveling_step, pid_init, pid_step,
                      resolved_rate_from_columns)
from .teleop import (DEFAULT_PORT, PORT_ENV_VAR, PROTOCOL_VERSION,
                     STALENESS_S, OperatorCommand, ProtocolError,
                     SequencedReader, WireMessage, encode_message,
                     map_input)
from .trials import (CONDITIONS, DEFAULT_ENV, LogRow, Outcome, TrialConfig,
                     TrialEnv, TrialEvent, TrialRecord, drinking_task,
                     read_log, write_log)

DEFAULT_DECIMATION = 5         # broadcast every 5th tick: 20 Hz display
STATE_BUFFER_TICKS = 8         # drop-oldest depth for state broadcasts
HANDSHAKE_TIMEOUT_S = 5.0

CONTROL_EVENTS = ("stop", "resume", "set_condition")


def default_port() -> int:
    """Port from the environment override, else the protocol default."""
    raw = os.environ.get(PORT_ENV_VAR)
    if raw is None:
        return DEFAULT_PORT
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{PORT_ENV_VAR} must be an integer, got {raw!r}") \
            from None


def command_from_payload(payload: dict) -> OperatorCommand:
    """Operator command from a wire `command` payload.

    The payload carries `axes` [x, y, z, ps, dev], `buttons` with grasp and
    release flags, and the sender timestamp `t`.
    """
    axes = payload.get("axes", (0.0, 0.0, 0.0, 0.0, 0.0))
    if not isinstance(axes, (list, tuple)) or len(axes) != 5:
        raise ProtocolError("bad-command", "axes must be a 5-list")
    try:
        ax = [float(v) for v in axes]
    except (TypeError, ValueError):
        raise ProtocolError("bad-command", "axes must be numeric") from None
    if any(not -1.0 <= v <= 1.0 for v in ax):
        raise ProtocolError("bad-command", "axes must lie in [-1, 1]")
    buttons = payload.get("buttons", {})
    if not isinstance(buttons, dict):
        raise ProtocolError("bad-command", "buttons must be an object")
    grasp_event = "none"
    if buttons.get("grasp"):
        grasp_event = "grasp"
    elif buttons.get("release"):
        grasp_event = "release"
    try:
        return OperatorCommand((ax[0], ax[1]), ax[2], ax[3], ax[4],
                               grasp_event, float(payload.get("t", 0.0)))
    except ValueError as exc:
        raise ProtocolError("bad-command", str(exc)) from None


class LiveSim:
    """Operator-driven counterpart of the scripted trial engine.

    Steps the same per-tick pipeline (forward kinematics, tilt, leveling,
    PID, safety, resolved-rate integration, wrist plant) under live
    commands, accumulating a trial record of the session.
    """

    def __init__(self, env: TrialEnv = DEFAULT_ENV,
                 condition: str = "wrist_enabled",
                 rom_deg: tuple[float, float] = (-40.0, 30.0)):
        if condition not in CONDITIONS:
            raise ValueError(f"unknown condition {condition!r}")
        self.env = env
        self.condition = condition
        self.rom_deg = (float(rom_deg[0]), float(rom_deg[1]))
        self.rom = (math.radians(rom_deg[0]), math.radians(rom_deg[1]))
        self.lim = SafetyLimits(env.hand_speed_max, env.wrist_speed_max,
                                self.rom)
        self.spring = default_spring(env.plant, env.spring_k_nmm_deg,
                                     self.rom)
        self.q = [math.radians(v) for v in env.home_proximal_deg]
        self.t = 0.0
        self.tick = 0
        self.held = 0
        self.estopped = False
        self.samples: list[LogRow] = []
        self.events: list[TrialEvent] = []
        self._init_wrist()

    def _init_wrist(self) -> None:
        self.enabled = self.condition == "wrist_enabled"
        theta0 = 0.0
        if self.enabled:
            theta0 = required_wrist_deviation(
                self.env.geometry, tuple(self.q), 0.0, self.rom).angle
        self.st = PlantState(theta0, 0.0, False)
        self.pid = pid_init(theta0)
        self.setpoint = theta0
        self.lev = LevelingConfig(k_lev=self.env.k_lev, theta_ref=0.0,
                                  enabled=self.enabled)

    def estop(self) -> None:
        self.estopped = True

    def resume(self) -> None:
        self.estopped = False

    def set_condition(self, condition: str) -> TrialRecord | None:
        """Switch condition, returning the finished segment's record."""
        if condition not in CONDITIONS:
            raise ValueError(f"unknown condition {condition!r}")
        rec = self.record()
        self.samples = []
        self.events = []
        self.t = 0.0
        self.tick = 0
        self.condition = condition
        self._init_wrist()
        return rec

    def record(self) -> TrialRecord | None:
        if not self.samples:
            return None
        cfg = TrialConfig("operator", self.condition, 0, self.rom_deg,
                          drinking_task())
        return TrialRecord(cfg, tuple(self.samples), tuple(self.events),
                           Outcome())

    def step(self, cmd: OperatorCommand) -> dict:
        """Advance one tick under the given command; returns state payload."""
        env = self.env
        dt = env.dt
        if self.estopped:
            cmd = OperatorCommand(timestamp=cmd.timestamp)
        m = map_input(cmd, self.lim)
        q1, q2, q3, q4 = self.q
        fr, cols = jacobian_columns(env.geometry, q1, q2, q3, q4, 0.0)
        qf = fr.q_forearm
        if self.enabled:
            theta = self.st.theta
            half = -0.5 * theta
            q_hand = quat.mul(qf, (math.cos(half), 0.0, math.sin(half), 0.0))
        else:
            theta = 0.0
            q_hand = qf
        tl = tilt_from_quat(q_hand)
        wrist_cmd = 0.0
        if self.enabled and not self.estopped:
            lo, hi = self.rom
            inc = leveling_step(self.lev, tl.tilt_correctable,
                                m.wrist_dev_v * dt, dt, env.wrist_speed_max)
            self.setpoint = min(hi, max(lo, self.setpoint + inc))
            wrist_cmd, self.pid = pid_step(env.pid_gains, self.pid,
                                           self.setpoint, self.st.theta, dt)
        q_now = JointConfig(q1, q2, q3, q4, theta, float(self.held))
        ver = apply_safety(self.lim, q_now, m.hand_v, wrist_cmd)
        rr = resolved_rate_from_columns(cols, *ver.hand_v)

        if m.grasp_event == "grasp" and not self.held:
            self.events.append(TrialEvent("grasp", round(self.t, 6)))
            self.held = 1
        elif m.grasp_event == "release" and self.held:
            self.events.append(TrialEvent("release", round(self.t, 6)))
            self.held = 0

        deg = math.degrees
        px, py, pz = fr.p_hand
        self.samples.append(LogRow(
            self.t, deg(q1), deg(q2), deg(q3), deg(q4), deg(theta),
            self.held, px, py, pz, q_hand[0], q_hand[1], q_hand[2],
            q_hand[3], deg(tl.tilt_total), deg(tl.tilt_correctable),
            deg(self.lev.theta_ref), ver.hand_v[0], ver.hand_v[1],
            ver.hand_v[2], deg(m.wrist_ps_v), deg(ver.wrist_v),
            int(ver.speed_flag), int(ver.rom_flag)))

        if not self.estopped:
            if self.enabled:
                pose_fa = Pose(fr.p_wrist, quat.normalize(qf))
                tension = drive_tension(env.plant, self.spring, env.tendon,
                                        env.moment_arm_m, ver.wrist_v,
                                        self.st, pose_fa)
                self.st = step_plant(env.plant, self.spring, env.tendon,
                                     self.st, tension, env.moment_arm_m,
                                     dt, self.rom, pose_fa)
            self.q[0] = q1 + dt * rr[0]
            self.q[1] = q2 + dt * rr[1]
            self.q[2] = q3 + dt * rr[2]
            self.q[3] = q4 + dt * (rr[3] + m.wrist_ps_v)

        payload = state_payload(self.t, (deg(q1), deg(q2), deg(q3), deg(q4),
                                         deg(theta)), self.held,
                                (px, py, pz), deg(tl.tilt_total),
                                deg(self.lev.theta_ref), self.condition,
                                int(ver.speed_flag), int(ver.rom_flag),
                                int(self.estopped))
        payload["tick"] = self.tick
        self.t += dt
        self.tick += 1
        return payload


def state_payload(t, q_deg, grasp, hand_pos_m, tilt_deg, theta_ref_deg,
                  condition, speed_flag, rom_flag, estopped=0) -> dict:
    return {"t": round(t, 6),
            "q_deg": [round(v, 6) for v in q_deg],
            "grasp": grasp,
            "hand_pos_m": [round(v, 6) for v in hand_pos_m],
            "tilt_deg": round(tilt_deg, 6),
            "theta_ref_deg": round(theta_ref_deg, 6),
            "condition": condition,
            "flags": {"speed": speed_flag, "rom": rom_flag,
                      "estopped": estopped}}


def _row_payload(row: LogRow, condition: str) -> dict:
    return state_payload(row.t_s,
                         (row.q_sh_fe_deg, row.q_sh_ie_deg, row.q_el_fe_deg,
                          row.q_fa_ps_deg, row.q_wr_dev_deg), row.grasp,
                         (row.hand_x_m, row.hand_y_m, row.hand_z_m),
                         row.tilt_total_deg, row.theta_ref_deg, condition,
                         row.flag_speed, row.flag_rom)


class _Outbox:
    """Single-writer message sender with per-direction sequence numbers."""

    def __init__(self, conn):
        self.conn = conn
        self.seq = 0
        self.lock = threading.Lock()

    def send(self, kind: str, payload: dict) -> None:
        with self.lock:
            msg = WireMessage(kind, payload, self.seq)
            self.seq += 1
            self.conn.send(encode_message(msg).decode("utf-8"))


def _handshake(conn, outbox: _Outbox, reader: SequencedReader) -> int | None:
    """Validate the operator hello; returns the negotiated decimation."""
    try:
        msg = reader.decode(conn.recv(timeout=HANDSHAKE_TIMEOUT_S))
    except ProtocolError as exc:
        outbox.send("error", {"code": exc.code, "text": exc.text})
        return None
    except (TimeoutError, ConnectionClosed):
        return None
    if msg.kind != "hello":
        outbox.send("error", {"code": "bad-handshake",
                              "text": "first message must be hello"})
        return None
    if msg.payload.get("version") != PROTOCOL_VERSION:
        outbox.send("error", {"code": "version-mismatch",
                              "text": f"server speaks version "
                                      f"{PROTOCOL_VERSION}"})
        return None
    decimation = msg.payload.get("decimation", DEFAULT_DECIMATION)
    if not isinstance(decimation, int) or not 1 <= decimation <= 100:
        outbox.send("error", {"code": "bad-handshake",
                              "text": "decimation must be in [1, 100]"})
        return None
    outbox.send("hello", {"version": PROTOCOL_VERSION, "role": "simulator",
                          "decimation": decimation})
    return decimation


class TeleopServer:
    """WebSocket front end around LiveSim; one operator at a time."""

    def __init__(self, env: TrialEnv = DEFAULT_ENV,
                 condition: str = "wrist_enabled",
                 rom_deg: tuple[float, float] = (-40.0, 30.0),
                 port: int | None = None, host: str = "127.0.0.1",
                 out_dir=None):
        self.env = env
        self.condition = condition
        self.rom_deg = rom_deg
        self.port = default_port() if port is None else port
        self.host = host
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self._busy = threading.Lock()
        self._server = None
        self._thread = None
        self._segments = 0

    def start(self) -> None:
        self._server = ws_serve(self._handler, self.host, self.port)
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._thread.join(timeout=5)
            self._server = None

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()

    def serve_forever(self) -> None:
        if self._server is None:
            self.start()
        try:
            self._thread.join()
        except KeyboardInterrupt:
            self.stop()

    def _save_segment(self, rec: TrialRecord | None) -> None:
        if rec is None or self.out_dir is None:
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._segments += 1
        write_log(rec, self.out_dir / f"session_{self._segments}.csv")

    def _handler(self, conn) -> None:
        outbox = _Outbox(conn)
        if not self._busy.acquire(blocking=False):
            try:
                outbox.send("error", {"code": "busy",
                                      "text": "another operator is "
                                              "connected"})
            except ConnectionClosed:
                pass
            return
        try:
            self._run_session(conn, outbox)
        except ConnectionClosed:
            pass
        finally:
            self._busy.release()

    def _run_session(self, conn, outbox: _Outbox) -> None:
        reader = SequencedReader()
        decimation = _handshake(conn, outbox, reader)
        if decimation is None:
            return
        sim = LiveSim(self.env, self.condition, self.rom_deg)
        inbox: Queue = Queue()
        states: deque = deque(maxlen=STATE_BUFFER_TICKS)
        stop = threading.Event()

        def drain_inbox(applied: OperatorCommand, pending: deque,
                        last_rx: float) -> tuple[OperatorCommand, float]:
            while True:
                try:
                    kind, value = inbox.get_nowait()
                except Empty:
                    return applied, last_rx
                if kind == "cmd":
                    # button presses are latched so none is missed even if
                    # several commands arrive within one tick
                    if value.grasp_event != "none":
                        pending.append(value.grasp_event)
                    applied = value
                    last_rx = time.monotonic()
                elif value == "stop":
                    sim.estop()
                    outbox.send("event", {"name": "stopped",
                                          "t": round(sim.t, 6)})
                elif value == "resume":
                    sim.resume()
                    outbox.send("event", {"name": "resumed",
                                          "t": round(sim.t, 6)})
                else:
                    self._save_segment(sim.set_condition(value))
                    outbox.send("event", {"name": "condition_changed",
                                          "t": round(sim.t, 6),
                                          "condition": value})

        def sim_loop() -> None:
            applied = OperatorCommand()
            pending: deque = deque()
            last_rx = time.monotonic()
            deadline = time.monotonic()
            while not stop.is_set():
                try:
                    applied, last_rx = drain_inbox(applied, pending,
                                                   last_rx)
                    stale = time.monotonic() - last_rx > STALENESS_S
                    grasp = pending.popleft() if pending else "none"
                    cmd = OperatorCommand(
                        (0.0, 0.0) if stale else applied.v_xy,
                        0.0 if stale else applied.v_z,
                        0.0 if stale else applied.wrist_ps_vel,
                        0.0 if stale else applied.wrist_dev_vel,
                        grasp, applied.timestamp)
                    n_events = len(sim.events)
                    states.append(sim.step(cmd))
                    for ev in sim.events[n_events:]:
                        outbox.send("event", {"name": ev.name, "t": ev.t})
                except ConnectionClosed:
                    stop.set()
                    return
                # resynchronize the wall-clock schedule after a stall
                # instead of bursting ticks to catch up
                deadline += sim.env.dt
                if deadline < time.monotonic() - 0.1:
                    deadline = time.monotonic()
                pause = deadline - time.monotonic()
                if pause > 0:
                    time.sleep(pause)

        def send_loop() -> None:
            while not stop.is_set():
                try:
                    payload = states.popleft()
                except IndexError:
                    time.sleep(0.001)
                    continue
                if payload["tick"] % decimation == 0:
                    body = dict(payload)
                    del body["tick"]
                    try:
                        outbox.send("state", body)
                    except ConnectionClosed:
                        stop.set()

        threads = [threading.Thread(target=sim_loop, daemon=True),
                   threading.Thread(target=send_loop, daemon=True)]
        for t in threads:
            t.start()
        try:
            for raw in conn:
                try:
                    msg = reader.decode(raw)
                    self._dispatch(msg, inbox)
                except ProtocolError as exc:
                    outbox.send("error", {"code": exc.code,
                                          "text": exc.text})
                    break
        except ConnectionClosed:
            pass
        finally:
            stop.set()
            for t in threads:
                t.join(timeout=2)
            self._save_segment(sim.record())

    @staticmethod
    def _dispatch(msg: WireMessage, inbox: Queue) -> None:
        if msg.kind == "command":
            inbox.put(("cmd", command_from_payload(msg.payload)))
        elif msg.kind == "event":
            name = msg.payload.get("name")
            if name not in CONTROL_EVENTS:
                raise ProtocolError("bad-event", f"unknown event {name!r}")
            if name == "set_condition":
                condition = msg.payload.get("condition")
                if condition not in CONDITIONS:
                    raise ProtocolError("bad-event",
                                        f"unknown condition {condition!r}")
                inbox.put(("ctrl", condition))
            else:
                inbox.put(("ctrl", name))
        elif msg.kind == "hello":
            raise ProtocolError("bad-handshake", "hello already exchanged")
        # error messages from the peer are informational; nothing to do


class ReplayServer:
    """Serves a recorded trial log over the wire protocol for playback."""

    def __init__(self, log_path, port: int | None = None,
                 host: str = "127.0.0.1", speed: float = 1.0):
        self.record = read_log(log_path)
        self.port = default_port() if port is None else port
        self.host = host
        if speed < 0.0:
            raise ValueError("replay speed must be >= 0")
        self.speed = speed
        self._server = None
        self._thread = None

    def start(self) -> None:
        self._server = ws_serve(self._handler, self.host, self.port)
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._thread.join(timeout=5)
            self._server = None

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()

    def serve_forever(self) -> None:
        if self._server is None:
            self.start()
        try:
            self._thread.join()
        except KeyboardInterrupt:
            self.stop()

    def _handler(self, conn) -> None:
        outbox = _Outbox(conn)
        decimation = _handshake(conn, outbox, SequencedReader())
        if decimation is None:
            return
        rec = self.record
        condition = rec.config.condition
        events = sorted(rec.events, key=lambda e: e.t)
        next_event = 0
        dt = 0.0
        if len(rec.samples) > 1:
            dt = rec.samples[1].t_s - rec.samples[0].t_s
        try:
            deadline = time.monotonic()
            for i, row in enumerate(rec.samples):
                while next_event < len(events) \
                        and events[next_event].t <= row.t_s:
                    ev = events[next_event]
                    outbox.send("event", {"name": ev.name, "t": ev.t})
                    next_event += 1
                if i % decimation == 0:
                    outbox.send("state", _row_payload(row, condition))
                if self.speed > 0.0 and dt > 0.0:
                    deadline += dt / self.speed
                    pause = deadline - time.monotonic()
                    if pause > 0:
                        time.sleep(pause)
            while next_event < len(events):
                ev = events[next_event]
                outbox.send("event", {"name": ev.name, "t": ev.t})
                next_event += 1
            outbox.send("event", {"name": "replay_complete",
                                  "t": rec.samples[-1].t_s})
        except ConnectionClosed:
            pass

"""Command-line entry point: run experiments, analyze logs, serve, replay.

Experiment configuration lives in a versioned JSON file.  Every key is
validated against the schema below and unknown or ill-typed keys are
rejected with the offending dotted path, so a typo fails loudly instead
of silently falling back to a default.

    {
      "config_version": 1,
      "seed": 42,
      "out_dir": "results",
      "participants": [{"id": "P1", "rom_deg": [-40.0, 30.0]}],
      "tasks": ["drinking", "scratch_level"],
      "trials_per_condition": 4,
      "task_params": {"fill_level": 0.8, "stick_length": 0.30},
      "overrides": {
        "timeout_s": 60.0,
        "plant": {"inertia_I": 0.0015},
        "tendon": {"friction_mu": 0.15},
        "pid": {"kp": 100.0},
        "spill": {"psi_high_fill_deg": 15.0}
      }
    }

Only "config_version" and "seed" are required; everything else falls
back to the defaults shown above (eight participants P1..P8, both tasks).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from multiprocessing import Pool
from pathlib import Path

from .actuation import TendonPath, WristPlantParams
from .control import PidGains
from .metrics import write_metrics_csv
from .reporting import (build_report, headline_lines, ingest_directory,
                        write_plot_csvs, write_report)
from .server import ReplayServer, TeleopServer
from .teleop import DEFAULT_PORT, PORT_ENV_VAR
from .trials import (CONDITIONS, DEFAULT_ENV, Participant, SpillModel,
                     TrialConfig, TrialEnv, default_participants,
                     drinking_task, pair_schedule, randomize_schedule,
                     run_trial, run_trial_pair, scratch_task, write_log)

CONFIG_VERSION = 1

_TOP_KEYS = ("config_version", "seed", "out_dir", "participants", "tasks",
             "trials_per_condition", "task_params", "overrides")
_PARTICIPANT_KEYS = ("id", "rom_deg")
_TASK_PARAM_KEYS = ("fill_level", "stick_length")
_ENV_SCALARS = ("spring_k_nmm_deg", "moment_arm_m", "hand_speed_max",
                "wrist_speed_max", "k_lev", "dt", "timeout_s", "pace",
                "noise_sigma", "leveling_tolerance_deg", "marker_radius_m",
                "grip_capacity", "grip_fail_prob", "scratch_theta_ref_deg")
_OVERRIDE_GROUPS = {"plant": WristPlantParams, "tendon": TendonPath,
                    "pid": PidGains, "spill": SpillModel}


class ConfigError(Exception):
    pass


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    out_dir: str
    participants: tuple[Participant, ...]
    tasks: tuple[str, ...]
    trials_per_condition: int
    env: TrialEnv
    fill_level: float = 0.8
    stick_length: float = 0.30

    def task_specs(self) -> tuple:
        specs = []
        for name in self.tasks:
            if name == "drinking":
                specs.append(drinking_task(self.fill_level))
            else:
                specs.append(scratch_task(self.stick_length))
        return tuple(specs)


def _reject_unknown(obj: dict, allowed, path: str) -> None:
    for key in obj:
        if key not in allowed:
            dotted = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown key '{dotted}' (expected one of: "
                              f"{', '.join(allowed)})")


def _number(obj: dict, key: str, path: str, default=None) -> float | None:
    if key not in obj:
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        dotted = f"{path}.{key}" if path else key
        raise ConfigError(f"'{dotted}' must be a number")
    return float(value)


def _integer(obj: dict, key: str, path: str, default=None) -> int | None:
    if key not in obj:
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        dotted = f"{path}.{key}" if path else key
        raise ConfigError(f"'{dotted}' must be an integer")
    return value


def _participants(raw) -> tuple[Participant, ...]:
    if raw is None:
        return default_participants()
    if not isinstance(raw, list) or not raw:
        raise ConfigError("'participants' must be a non-empty list")
    out = []
    for i, entry in enumerate(raw):
        path = f"participants[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"'{path}' must be an object")
        _reject_unknown(entry, _PARTICIPANT_KEYS, path)
        pid = entry.get("id")
        if not isinstance(pid, str) or not pid:
            raise ConfigError(f"'{path}.id' must be a non-empty string")
        rom = entry.get("rom_deg", [-40.0, 30.0])
        if not isinstance(rom, list) or len(rom) != 2 \
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       for v in rom):
            raise ConfigError(f"'{path}.rom_deg' must be [min_deg, max_deg]")
        lo, hi = float(rom[0]), float(rom[1])
        if not lo < 0.0 < hi:
            raise ConfigError(f"'{path}.rom_deg' must bracket zero")
        out.append(Participant(pid, (lo, hi)))
    if len({p.participant_id for p in out}) != len(out):
        raise ConfigError("'participants' ids must be unique")
    return tuple(out)


def _group_override(defaults, raw, path: str):
    """One dataclass rebuilt with the given field overrides applied."""
    if not isinstance(raw, dict):
        raise ConfigError(f"'{path}' must be an object")
    names = [f.name for f in dataclasses.fields(defaults)]
    _reject_unknown(raw, names, path)
    changes = {key: _number(raw, key, path) for key in raw}
    try:
        return dataclasses.replace(defaults, **changes)
    except ValueError as exc:
        raise ConfigError(f"'{path}': {exc}") from None


def _environment(raw) -> TrialEnv:
    if raw is None:
        return DEFAULT_ENV
    if not isinstance(raw, dict):
        raise ConfigError("'overrides' must be an object")
    _reject_unknown(raw, _ENV_SCALARS + tuple(_OVERRIDE_GROUPS), "overrides")
    changes: dict = {}
    for key in raw:
        group = _OVERRIDE_GROUPS.get(key)
        if group is None:
            changes[key] = _number(raw, key, "overrides")
        else:
            field = "pid_gains" if key == "pid" else key
            changes[field] = _group_override(getattr(DEFAULT_ENV, field),
                                             raw[key], f"overrides.{key}")
    try:
        return dataclasses.replace(DEFAULT_ENV, **changes)
    except ValueError as exc:
        raise ConfigError(f"'overrides': {exc}") from None


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment configuration file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "")
    version = raw.get("config_version")
    if version != CONFIG_VERSION:
        raise ConfigError(f"'config_version' must be {CONFIG_VERSION}, "
                          f"got {version!r}")
    seed = _integer(raw, "seed", "")
    if seed is None:
        raise ConfigError("'seed' is required")
    out_dir = raw.get("out_dir", "results")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("'out_dir' must be a non-empty string")

    tasks = raw.get("tasks", ["drinking", "scratch_level"])
    if not isinstance(tasks, list) or not tasks:
        raise ConfigError("'tasks' must be a non-empty list")
    for name in tasks:
        if name not in ("drinking", "scratch_level"):
            raise ConfigError(f"'tasks' entries must be 'drinking' or "
                              f"'scratch_level', got {name!r}")
    if len(set(tasks)) != len(tasks):
        raise ConfigError("'tasks' entries must be unique")

    trials = _integer(raw, "trials_per_condition", "", 4)
    if trials < 1:
        raise ConfigError("'trials_per_condition' must be >= 1")

    params = raw.get("task_params", {})
    if not isinstance(params, dict):
        raise ConfigError("'task_params' must be an object")
    _reject_unknown(params, _TASK_PARAM_KEYS, "task_params")
    fill = _number(params, "fill_level", "task_params", 0.8)
    stick = _number(params, "stick_length", "task_params", 0.30)
    if not 0.0 <= fill <= 1.0:
        raise ConfigError("'task_params.fill_level' must be in [0, 1]")
    if stick <= 0.0:
        raise ConfigError("'task_params.stick_length' must be positive")

    return ExperimentConfig(seed, out_dir, _participants(
        raw.get("participants")), tuple(tasks), trials,
        _environment(raw.get("overrides")), fill, stick)


def log_name(cfg: TrialConfig) -> str:
    return f"{cfg.participant_id}_{cfg.task.kind}_{cfg.condition}" \
           f"_{cfg.seed}.csv"


def _run_group(args):
    group, env = args
    if len(group) == 2:
        return run_trial_pair(group[0], group[1], env)
    return (run_trial(group[0], env),)


def _write_analysis(records, failures, out_dir: Path) -> list[str]:
    report = build_report(records, failures)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report(report, out_dir)
    write_plot_csvs(report, out_dir)
    write_metrics_csv(records, out_dir / "metrics.csv")
    return headline_lines(report)


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    out_dir = Path(cfg.out_dir if args.out is None else args.out)
    schedule = randomize_schedule(cfg.participants, seed, cfg.task_specs(),
                                  cfg.trials_per_condition)
    if args.condition is not None:
        schedule = [c for c in schedule if c.condition == args.condition]
    log_dir = out_dir / "logs"
    log_dir.mkdir(parents=True, exist_ok=True)
    todo = [c for c in schedule if not (log_dir / log_name(c)).exists()]
    skipped = len(schedule) - len(todo)
    groups = pair_schedule(todo)
    if args.jobs > 1:
        with Pool(args.jobs) as pool:
            results = pool.map(_run_group,
                               [(g, cfg.env) for g in groups])
    else:
        results = [_run_group((g, cfg.env)) for g in groups]
    for recs in results:
        for rec in recs:
            write_log(rec, log_dir / log_name(rec.config))
    records, failures = ingest_directory(log_dir)
    lines = _write_analysis(records, failures, out_dir)
    if skipped:
        print(f"resumed: {skipped} of {len(schedule)} logs already present")
    print(f"{len(records)} trial logs in {log_dir}, report in {out_dir}")
    for line in lines:
        print(line)
    for failure in failures:
        print(f"warning: {failure.path}: {failure.error}", file=sys.stderr)
    return 0


def cmd_analyze(args) -> int:
    log_dir = Path(args.dir)
    if not log_dir.is_dir():
        print(f"error: {log_dir} is not a directory", file=sys.stderr)
        return 2
    records, failures = ingest_directory(log_dir)
    if not records and not failures:
        print(f"error: no trial logs in {log_dir}", file=sys.stderr)
        return 2
    out_dir = log_dir / "analysis" if args.out is None else Path(args.out)
    lines = _write_analysis(records, failures, out_dir)
    print(f"{len(records)} trial logs analyzed, report in {out_dir}")
    for line in lines:
        print(line)
    for failure in failures:
        print(f"warning: {failure.path}: {failure.error}", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    cfg = load_config(args.config)
    condition = args.condition or "wrist_enabled"
    out_dir = Path(cfg.out_dir) / "sessions"
    try:
        server = TeleopServer(cfg.env, condition,
                              cfg.participants[0].rom_deg, args.port,
                              out_dir=out_dir)
        server.start()
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"teleoperation server on ws://127.0.0.1:{server.port} "
          f"({condition}); session logs in {out_dir}", flush=True)
    server.serve_forever()
    return 0


def cmd_replay(args) -> int:
    try:
        server = ReplayServer(args.log, args.port, speed=args.speed)
        server.start()
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"replaying {args.log} on ws://127.0.0.1:{server.port}",
          flush=True)
    server.serve_forever()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exosim",
        description="Exoskeleton wrist simulator: batch experiments, "
                    "analysis, live teleoperation, and log replay.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("experiment",
                       help="run a trial batch from a config file")
    p.add_argument("config", help="experiment configuration (JSON)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="override the config output directory")
    p.add_argument("--condition", choices=CONDITIONS,
                   help="run only one condition")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker processes for trial simulation")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("analyze", help="rebuild reports from a log directory")
    p.add_argument("dir", help="directory of trial logs")
    p.add_argument("--out", help="analysis output directory "
                                 "(default: <dir>/analysis)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("serve", help="serve live teleoperation over "
                                     "WebSocket")
    p.add_argument("config", help="experiment configuration (JSON)")
    p.add_argument("--port", type=int,
                   help=f"TCP port (default: ${PORT_ENV_VAR} or "
                        f"{DEFAULT_PORT})")
    p.add_argument("--condition", choices=CONDITIONS,
                   help="starting condition (default: wrist_enabled)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="stream a recorded log over WebSocket")
    p.add_argument("log", help="trial log CSV")
    p.add_argument("--port", type=int,
                   help=f"TCP port (default: ${PORT_ENV_VAR} or "
                        f"{DEFAULT_PORT})")
    p.add_argument("--speed", type=float, default=1.0,
                   help="playback rate multiplier; 0 streams unpaced")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Kinematic and task metrics computed from trial records.

Range-of-motion extraction over the wrist deviation series, deviation
sampled at grasp/release events, task completion time, and participant-
level aggregation, plus the per-participant metrics table emitter.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from statistics import fmean
from typing import NamedTuple

from .trials import TrialRecord


@dataclass(frozen=True, slots=True)
class DeviationSeries:
    """Wrist deviation angles (deg) with aligned sample times (s)."""

    values: tuple[float, ...]
    sample_times: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.sample_times):
            raise ValueError("values and sample_times must align")


class RomMetrics(NamedTuple):
    rom: float
    abduction_peak: float
    adduction_peak: float


class CompletionTime(NamedTuple):
    seconds: float
    timed_out: bool


def deviation_series(rec: TrialRecord) -> DeviationSeries:
    """The logged wrist deviation track of one trial."""
    return DeviationSeries(tuple(r.q_wr_dev_deg for r in rec.samples),
                           tuple(r.t_s for r in rec.samples))


def rom_metrics(s: DeviationSeries) -> RomMetrics:
    """Span and signed peaks of the deviation series.

    The span is the exact max minus min over the raw samples; no filtering
    or smoothing is applied first.
    """
    if not s.values:
        raise ValueError("deviation series is empty")
    hi = max(s.values)
    lo = min(s.values)
    return RomMetrics(hi - lo, hi, lo)


def event_deviation(rec: TrialRecord, event: str) -> float:
    """Deviation (deg) at the logged sample nearest the named event."""
    if event not in ("grasp", "release"):
        raise ValueError(f"unknown event {event!r}")
    if event == "release" and rec.config.task.kind != "scratch_level":
        raise ValueError("release deviation applies to scratch trials only")
    t_event = rec.event_time(event)
    if t_event is None:
        raise ValueError(f"record has no {event!r} event")
    row = min(rec.samples, key=lambda r: abs(r.t_s - t_event))
    return row.q_wr_dev_deg


def completion_time(rec: TrialRecord) -> CompletionTime:
    """Terminal event time minus the first commanded-motion time."""
    first_cmd = rec.samples[0].t_s
    for row in rec.samples:
        if (row.cmd_vx, row.cmd_vy, row.cmd_vz, row.cmd_ps,
                row.cmd_dev) != (0.0, 0.0, 0.0, 0.0, 0.0):
            first_cmd = row.t_s
            break
    terminal = None
    for ev in rec.events:
        if ev.name in ("release", "placement"):
            terminal = ev.t if terminal is None else max(terminal, ev.t)
    if rec.outcome.timed_out or terminal is None:
        return CompletionTime(round(rec.samples[-1].t_s - first_cmd, 6), True)
    return CompletionTime(round(terminal - first_cmd, 6), False)


def participant_aggregate(per_trial: list[RomMetrics]) -> RomMetrics:
    """Participant-level summary: widest span, outermost signed peaks."""
    if not per_trial:
        raise ValueError("aggregate needs at least one trial")
    return RomMetrics(max(m.rom for m in per_trial),
                      max(m.abduction_peak for m in per_trial),
                      min(m.adduction_peak for m in per_trial))


METRICS_COLUMNS = ("participant", "condition", "task", "rom_deg",
                   "abd_peak_deg", "add_peak_deg", "grasp_dev_deg",
                   "release_dev_deg", "tct_s")


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.6f}"


def metrics_table(records: list[TrialRecord]) -> list[tuple]:
    """One row per (participant, condition, task kind) group.

    ROM fields aggregate across the group's trials; event deviations and
    completion time are group means.  Release deviation is blank for
    drinking trials, where no release sample is defined.
    """
    groups: dict[tuple, list[TrialRecord]] = {}
    for rec in records:
        key = (rec.config.participant_id, rec.config.condition,
               rec.config.task.kind)
        groups.setdefault(key, []).append(rec)
    rows = []
    for key in sorted(groups):
        recs = groups[key]
        agg = participant_aggregate(
            [rom_metrics(deviation_series(r)) for r in recs])
        grasp = [event_deviation(r, "grasp") for r in recs
                 if r.event_time("grasp") is not None]
        release = [event_deviation(r, "release") for r in recs
                   if key[2] == "scratch_level"
                   and r.event_time("release") is not None]
        rows.append((key[0], key[1], key[2],
                     round(agg.rom, 6), round(agg.abduction_peak, 6),
                     round(agg.adduction_peak, 6),
                     round(fmean(grasp), 6) if grasp else None,
                     round(fmean(release), 6) if release else None,
                     round(fmean([r.outcome.tct for r in recs]), 6)))
    return rows


def write_metrics_csv(records: list[TrialRecord], path) -> None:
    lines = [",".join(METRICS_COLUMNS)]
    for row in metrics_table(records):
        lines.append(",".join([row[0], row[1], row[2]]
                              + [_fmt(v) for v in row[3:]]))
    Path(path).write_text("\n".join(lines) + "\n")

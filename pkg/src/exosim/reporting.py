"""Experiment-level outcome and statistics reporting.

Builds one deterministic report from a set of trial records: outcome
counts per task and condition, chi-square contrasts on the spill and
leveling outcome tables, the paired battery on completion time and wrist
range of motion, per-trial rows backing the distribution plots, and an
error section for logs that failed to ingest.  Identical inputs produce
byte-identical JSON and text renderings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean
from typing import NamedTuple

from .metrics import (METRICS_COLUMNS, deviation_series, event_deviation,
                      metrics_table, participant_aggregate, rom_metrics)
from .stats import ContingencyTable, PairedSample, chi_square_independence, \
    select_and_run
from .trials import CONDITIONS, TrialRecord, read_log

REPORT_SCHEMA_VERSION = 1

# fewer pairs than this and the normality gate is meaningless
MIN_PAIRS = 3

DRINKING_CATEGORIES = ("spill", "no_spill")
LEVELING_CATEGORIES = ("exo_only_success", "human_assisted", "not_leveled",
                       "grasp_failure")

TRIAL_COLUMNS = ("participant", "condition", "task", "seed", "rom_deg",
                 "abd_peak_deg", "add_peak_deg", "grasp_dev_deg",
                 "release_dev_deg", "tct_s", "timed_out", "grip_failed",
                 "spill", "leveling")


class ComparisonRow(NamedTuple):
    comparison: str
    test: str
    statistic: float
    df: float | None
    p: float
    effect_size: float | None


class IngestFailure(NamedTuple):
    path: str
    error: str


@dataclass(frozen=True, slots=True)
class Report:
    n_trials: int
    outcome_counts: dict
    comparisons: tuple[ComparisonRow, ...]
    metrics_rows: tuple[tuple, ...]
    trial_rows: tuple[tuple, ...]
    errors: tuple[IngestFailure, ...]


def _record_key(rec: TrialRecord):
    cfg = rec.config
    return (cfg.participant_id, cfg.task.kind, cfg.condition, cfg.seed)


def outcome_counts(records) -> dict:
    """{task: {condition: {category: count}}} with zero-filled categories."""
    counts: dict = {}
    for rec in records:
        kind = rec.config.task.kind
        cats = DRINKING_CATEGORIES if kind == "drinking" \
            else LEVELING_CATEGORIES
        per_cond = counts.setdefault(kind, {})
        group = per_cond.setdefault(rec.config.condition,
                                    {c: 0 for c in cats})
        outcome = rec.outcome.spill if kind == "drinking" \
            else rec.outcome.leveling
        group[outcome] += 1
    return counts


def _contingency_rows(counts, kind) -> tuple | None:
    """Condition x (bad, good) table, or None when a margin is empty."""
    per_cond = counts.get(kind, {})
    if set(per_cond) != set(CONDITIONS):
        return None
    rows = []
    for cond in CONDITIONS:
        group = per_cond[cond]
        if kind == "drinking":
            bad, good = group["spill"], group["no_spill"]
        else:
            good = group["exo_only_success"]
            bad = sum(group.values()) - good
        rows.append((bad, good))
    if min(r[0] + r[1] for r in rows) == 0:
        return None
    if any(rows[0][j] + rows[1][j] == 0 for j in (0, 1)):
        return None
    return tuple(rows)


def _chi_square_rows(name, rows) -> list[ComparisonRow]:
    table = ContingencyTable(rows)
    out = []
    for suffix, yates in (("", False), ("_yates", True)):
        res = chi_square_independence(table, yates=yates)
        out.append(ComparisonRow(name + suffix, res.test_name + suffix,
                                 res.statistic, res.df, res.p_two_tailed,
                                 res.effect_size))
    return out


def _paired_comparison(name, x, y) -> ComparisonRow | None:
    """Paired test on x - y, with flat difference vectors reported as such.

    Common-random-number seed pairing can make every paired difference
    identical (usually zero); the parametric machinery is undefined there,
    so those cases are reported descriptively instead of being dropped.
    """
    if len(x) < MIN_PAIRS:
        return None
    diffs = [a - b for a, b in zip(x, y)]
    if all(d == diffs[0] for d in diffs):
        if diffs[0] == 0.0:
            return ComparisonRow(name, "all_differences_zero", 0.0, None,
                                 1.0, None)
        return ComparisonRow(name, "constant_difference", diffs[0], None,
                             0.0, None)
    res = select_and_run(PairedSample(tuple(x), tuple(y)))
    return ComparisonRow(name, res.test_name, res.statistic, res.df,
                         res.p_two_tailed, res.effect_size)


def _per_participant_means(records, value_fn) -> dict:
    """{(kind, participant): {condition: mean value}}"""
    buckets: dict = {}
    for rec in records:
        cfg = rec.config
        key = (cfg.task.kind, cfg.participant_id)
        buckets.setdefault(key, {}).setdefault(cfg.condition,
                                               []).append(value_fn(rec))
    return {key: {cond: fmean(vals) for cond, vals in conds.items()}
            for key, conds in buckets.items()}


def _paired_vectors(means, kind):
    """Per-participant (enabled, locked) vectors for one task kind."""
    x, y = [], []
    for (k, pid) in sorted(means):
        conds = means[(k, pid)]
        if k == kind and set(conds) == set(CONDITIONS):
            x.append(conds["wrist_enabled"])
            y.append(conds["wrist_locked"])
    return x, y


def build_comparisons(records) -> tuple[ComparisonRow, ...]:
    counts = outcome_counts(records)
    tct = _per_participant_means(records, lambda r: r.outcome.tct)
    rom = _per_participant_means(
        records, lambda r: rom_metrics(deviation_series(r)).rom)
    out: list[ComparisonRow] = []
    for kind in sorted(counts):
        label = "spill" if kind == "drinking" else "leveling"
        rows = _contingency_rows(counts, kind)
        if rows is not None:
            out.extend(_chi_square_rows(f"{kind}_{label}_by_condition",
                                        rows))
        for metric, means in (("completion_time", tct), ("wrist_rom", rom)):
            row = _paired_comparison(f"{kind}_{metric}",
                                     *_paired_vectors(means, kind))
            if row is not None:
                out.append(row)
    return tuple(out)


def trial_rows(records) -> tuple[tuple, ...]:
    rows = []
    for rec in sorted(records, key=_record_key):
        cfg = rec.config
        m = rom_metrics(deviation_series(rec))
        grasp = event_deviation(rec, "grasp") \
            if rec.event_time("grasp") is not None else None
        release = event_deviation(rec, "release") \
            if cfg.task.kind == "scratch_level" \
            and rec.event_time("release") is not None else None
        rows.append((cfg.participant_id, cfg.condition, cfg.task.kind,
                     cfg.seed, round(m.rom, 6), round(m.abduction_peak, 6),
                     round(m.adduction_peak, 6),
                     None if grasp is None else round(grasp, 6),
                     None if release is None else round(release, 6),
                     rec.outcome.tct, int(rec.outcome.timed_out),
                     int(rec.outcome.grip_failed), rec.outcome.spill,
                     rec.outcome.leveling))
    return tuple(rows)


def build_report(records, errors=()) -> Report:
    records = sorted(records, key=_record_key)
    failures = tuple(sorted(IngestFailure(p, e) for p, e in errors))
    return Report(len(records), outcome_counts(records),
                  build_comparisons(records),
                  tuple(metrics_table(records)), trial_rows(records),
                  failures)


def ingest_directory(log_dir) -> tuple[list[TrialRecord],
                                       list[IngestFailure]]:
    """Read every trial CSV in a directory, collecting failures by name."""
    records, failures = [], []
    for path in sorted(Path(log_dir).glob("*.csv")):
        try:
            records.append(read_log(path))
        except ValueError as exc:
            failures.append(IngestFailure(path.name, str(exc)))
    return records, failures


def report_to_json(report: Report) -> str:
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "n_trials": report.n_trials,
        "outcome_counts": report.outcome_counts,
        "comparisons": [row._asdict() for row in report.comparisons],
        "participant_metrics": [dict(zip(METRICS_COLUMNS, row))
                                for row in report.metrics_rows],
        "trials": [dict(zip(TRIAL_COLUMNS, row))
                   for row in report.trial_rows],
        "errors": [{"path": f.path, "error": f.error}
                   for f in report.errors],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _text_table(header, rows) -> list[str]:
    cells = [tuple(_fmt(v) for v in row) for row in rows]
    widths = [max(len(h), *(len(c[i]) for c in cells)) if cells else len(h)
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for row in cells:
        lines.append("  ".join(c.ljust(w)
                               for c, w in zip(row, widths)).rstrip())
    return lines


def headline_lines(report: Report) -> list[str]:
    """The printed summary: outcome rates and the completion-time tests."""
    lines = []
    for kind in sorted(report.outcome_counts):
        per_cond = report.outcome_counts[kind]
        good = "no_spill" if kind == "drinking" else "exo_only_success"
        label = "clean carries" if kind == "drinking" else "level placements"
        parts = []
        for cond in CONDITIONS:
            if cond in per_cond:
                group = per_cond[cond]
                parts.append(f"{cond} {group[good]}/{sum(group.values())}")
        if parts:
            lines.append(f"{kind} {label}: " + ", ".join(parts))
    for row in report.comparisons:
        if row.comparison.endswith("_completion_time"):
            lines.append(f"{row.comparison}: {row.test} "
                         f"p={_fmt(row.p)}")
    return lines


def report_to_text(report: Report) -> str:
    lines = ["trial outcome report",
             f"trials analyzed: {report.n_trials}",
             f"ingest errors: {len(report.errors)}", ""]
    lines.extend(headline_lines(report))
    lines.append("")
    lines.append("outcome counts")
    for kind in sorted(report.outcome_counts):
        for cond in CONDITIONS:
            group = report.outcome_counts[kind].get(cond)
            if group is None:
                continue
            cats = ", ".join(f"{c} {group[c]}" for c in sorted(group))
            lines.append(f"  {kind} {cond}: {cats}")
    lines.append("")
    lines.append("comparisons")
    header = ("comparison", "test", "statistic", "df", "p", "effect_size")
    lines.extend("  " + line
                 for line in _text_table(header, report.comparisons))
    if report.errors:
        lines.append("")
        lines.append("errors")
        for f in report.errors:
            lines.append(f"  {f.path}: {f.error}")
    return "\n".join(lines) + "\n"


def write_report(report: Report, out_dir) -> None:
    out_dir = Path(out_dir)
    (out_dir / "report.json").write_text(report_to_json(report))
    (out_dir / "report.txt").write_text(report_to_text(report))


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_plot_csvs(report: Report, out_dir) -> None:
    """Plot-ready flat files: outcome bars and per-trial distributions."""
    out_dir = Path(out_dir)
    lines = ["task,condition,category,count"]
    for kind in sorted(report.outcome_counts):
        for cond in CONDITIONS:
            group = report.outcome_counts[kind].get(cond)
            if group is None:
                continue
            for cat in sorted(group):
                lines.append(f"{kind},{cond},{cat},{group[cat]}")
    (out_dir / "outcome_counts.csv").write_text("\n".join(lines) + "\n")

    lines = [",".join(TRIAL_COLUMNS)]
    for row in report.trial_rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    (out_dir / "trial_metrics.csv").write_text("\n".join(lines) + "\n")

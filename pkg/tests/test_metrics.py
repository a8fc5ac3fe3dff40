import numpy as np
import pytest

from exosim.metrics import (METRICS_COLUMNS, CompletionTime,
                            DeviationSeries, RomMetrics, completion_time,
                            deviation_series, event_deviation,
                            metrics_table, participant_aggregate,
                            rom_metrics, write_metrics_csv)
from exosim.trials import (LogRow, Outcome, TrialConfig, TrialEvent,
                           TrialRecord, drinking_task, run_trial,
                           scratch_task)


def _cfg(condition="wrist_enabled", seed=42, task=None, participant="P1"):
    task = task if task is not None else drinking_task()
    return TrialConfig(participant, condition, seed, None, task)


def _row(t, dev=0.0, cmd_vx=0.0):
    return LogRow(t, 50.0, 0.0, -30.0, 0.0, dev, 0, 0.3, 0.0, 0.9,
                  1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, cmd_vx, 0.0, 0.0,
                  0.0, 0.0, 0, 0)


def _record(devs, events, task=None, outcome=None, first_cmd_idx=0):
    samples = tuple(_row(i * 0.01, dev=v,
                         cmd_vx=0.01 if i >= first_cmd_idx else 0.0)
                    for i, v in enumerate(devs))
    task = task if task is not None else drinking_task()
    if outcome is None:
        outcome = Outcome(spill="no_spill") if task.kind == "drinking" \
            else Outcome(leveling="not_leveled")
    return TrialRecord(_cfg(task=task), samples, events, outcome)


@pytest.fixture(scope="module")
def generated():
    return run_trial(_cfg(seed=42))


# ------------------------------------------------------------------- rom


def test_rom_span_and_signed_peaks():
    s = DeviationSeries((-5.0, 0.0, 10.0, -20.0, 15.0),
                        (0.0, 0.01, 0.02, 0.03, 0.04))
    assert rom_metrics(s) == RomMetrics(35.0, 15.0, -20.0)


def test_constant_series_has_zero_span():
    s = DeviationSeries((7.25,) * 5, tuple(i * 0.01 for i in range(5)))
    assert rom_metrics(s) == RomMetrics(0.0, 7.25, 7.25)


def test_zero_series_has_zero_metrics():
    s = DeviationSeries((0.0,) * 10, tuple(i * 0.01 for i in range(10)))
    assert rom_metrics(s) == RomMetrics(0.0, 0.0, 0.0)


def test_empty_series_is_rejected():
    with pytest.raises(ValueError):
        rom_metrics(DeviationSeries((), ()))


def test_misaligned_series_is_rejected():
    with pytest.raises(ValueError):
        DeviationSeries((1.0, 2.0), (0.0,))


def test_rom_is_sample_order_invariant():
    rng = np.random.default_rng(7)
    vals = tuple(float(v) for v in rng.normal(0.0, 12.0, size=64))
    perm = tuple(vals[i] for i in rng.permutation(64))
    times = tuple(i * 0.01 for i in range(64))
    assert rom_metrics(DeviationSeries(vals, times)) \
        == rom_metrics(DeviationSeries(perm, times))


def test_rom_matches_full_scan_oracle():
    """Exact agreement with a naive max/min scan, no tolerance."""
    rng = np.random.default_rng(123)
    for _ in range(100):
        n = int(rng.integers(1, 400))
        vals = tuple(float(v) for v in rng.normal(0.0, 15.0, size=n))
        s = DeviationSeries(vals, tuple(i * 0.01 for i in range(n)))
        hi, lo = vals[0], vals[0]
        for v in vals[1:]:
            hi = v if v > hi else hi
            lo = v if v < lo else lo
        assert rom_metrics(s) == RomMetrics(hi - lo, hi, lo)


def test_rom_oracle_on_long_series():
    rng = np.random.default_rng(5)
    vals = tuple(float(v) for v in rng.normal(0.0, 15.0, size=100_000))
    s = DeviationSeries(vals, tuple(i * 0.01 for i in range(100_000)))
    assert rom_metrics(s) == RomMetrics(max(vals) - min(vals),
                                        max(vals), min(vals))


def test_deviation_series_reads_the_wrist_column(generated):
    s = deviation_series(generated)
    assert s.values == tuple(r.q_wr_dev_deg for r in generated.samples)
    assert s.sample_times == tuple(r.t_s for r in generated.samples)


# ---------------------------------------------------------------- events


def test_event_deviation_uses_nearest_sample():
    """An event at 2.004 s reads the 2.00 s sample, not the 2.01 s one."""
    devs = [0.0] * 301
    devs[200] = 7.5
    devs[201] = -9.0
    rec = _record(devs, (TrialEvent("grasp", 2.004),
                         TrialEvent("release", 2.9)))
    assert event_deviation(rec, "grasp") == 7.5


def test_release_deviation_on_scratch_trial():
    devs = [0.0] * 301
    devs[250] = -4.0
    rec = _record(devs, (TrialEvent("grasp", 1.0),
                         TrialEvent("release", 2.5)), task=scratch_task())
    assert event_deviation(rec, "release") == -4.0


def test_release_deviation_rejected_for_drinking():
    rec = _record([0.0] * 101, (TrialEvent("grasp", 0.2),
                                TrialEvent("release", 0.8)))
    with pytest.raises(ValueError, match="scratch"):
        event_deviation(rec, "release")


def test_unknown_event_name_is_rejected(generated):
    with pytest.raises(ValueError, match="unknown event"):
        event_deviation(generated, "placement")


def test_missing_event_is_rejected():
    rec = _record([0.0] * 101, ())
    with pytest.raises(ValueError, match="grasp"):
        event_deviation(rec, "grasp")


# ------------------------------------------------------- completion time


def test_completion_time_spans_first_command_to_terminal_event():
    """Motion from 1.0 s with placement at 14.5 s completes in 13.5 s."""
    events = (TrialEvent("grasp", 2.0), TrialEvent("release", 14.5),
              TrialEvent("placement", 14.5))
    rec = _record([0.0] * 1501, events, task=scratch_task(),
                  first_cmd_idx=100)
    assert completion_time(rec) == CompletionTime(13.5, False)


def test_completion_time_flags_timeout():
    rec = _record([0.0] * 601, (TrialEvent("grasp", 2.0),),
                  outcome=Outcome(spill="no_spill", timed_out=True),
                  first_cmd_idx=50)
    seconds, timed_out = completion_time(rec)
    assert timed_out
    assert seconds == round(rec.samples[-1].t_s - 0.5, 6)


def test_missing_terminal_event_counts_as_timeout():
    rec = _record([0.0] * 101, (TrialEvent("grasp", 0.2),))
    assert completion_time(rec).timed_out


def test_completion_time_matches_recorded_outcome(generated):
    ct = completion_time(generated)
    assert ct.seconds == generated.outcome.tct
    assert ct.timed_out == generated.outcome.timed_out


# ------------------------------------------------------------- aggregate


def test_aggregate_takes_outermost_extremes():
    per_trial = [RomMetrics(10.0, 5.0, -5.0),
                 RomMetrics(22.0, 12.0, -10.0),
                 RomMetrics(12.0, 9.0, -3.0)]
    assert participant_aggregate(per_trial) == RomMetrics(22.0, 12.0, -10.0)


def test_aggregate_peaks_can_come_from_different_trials():
    per_trial = [RomMetrics(15.0, 12.0, -3.0), RomMetrics(15.0, 5.0, -10.0)]
    agg = participant_aggregate(per_trial)
    assert agg.abduction_peak == 12.0
    assert agg.adduction_peak == -10.0
    assert agg.rom == 15.0


def test_aggregate_is_idempotent_and_order_invariant():
    per_trial = [RomMetrics(10.0, 5.0, -5.0), RomMetrics(22.0, 12.0, -10.0)]
    agg = participant_aggregate(per_trial)
    assert participant_aggregate([agg]) == agg
    assert participant_aggregate(per_trial[::-1]) == agg


def test_aggregate_of_single_trial_is_itself():
    m = RomMetrics(9.0, 4.0, -5.0)
    assert participant_aggregate([m]) == m


def test_aggregate_rejects_empty_input():
    with pytest.raises(ValueError):
        participant_aggregate([])


# ----------------------------------------------------------------- table


def _table_records():
    devs_a = [0.0] * 101
    devs_a[10] = 6.0
    devs_a[40] = -2.0
    rec_a = _record(devs_a, (TrialEvent("grasp", 0.1),
                             TrialEvent("release", 0.8)),
                    outcome=Outcome(spill="no_spill", tct=0.7))
    devs_b = [0.0] * 101
    devs_b[10] = 2.0
    rec_b = _record(devs_b, (TrialEvent("grasp", 0.1),
                             TrialEvent("release", 0.6)),
                    outcome=Outcome(spill="no_spill", tct=0.5))
    devs_c = [0.0] * 101
    devs_c[50] = -8.0
    rec_c = _record(devs_c, (TrialEvent("grasp", 0.2),
                             TrialEvent("release", 0.5),
                             TrialEvent("placement", 0.5)),
                    task=scratch_task(),
                    outcome=Outcome(leveling="exo_only_success", tct=0.3))
    return [rec_a, rec_b, rec_c]


def test_metrics_table_groups_and_sorts():
    rows = metrics_table(_table_records())
    assert [r[:3] for r in rows] == [
        ("P1", "wrist_enabled", "drinking"),
        ("P1", "wrist_enabled", "scratch_level")]


def test_metrics_table_aggregates_rom_and_means():
    drinking = metrics_table(_table_records())[0]
    assert drinking[3] == 8.0
    assert drinking[4] == 6.0
    assert drinking[5] == -2.0
    assert drinking[6] == 4.0
    assert drinking[7] is None
    assert drinking[8] == 0.6


def test_metrics_table_fills_release_for_scratch():
    scratch = metrics_table(_table_records())[1]
    assert scratch[7] == -8.0


def test_metrics_csv_layout(tmp_path):
    path = tmp_path / "metrics.csv"
    write_metrics_csv(_table_records(), path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(METRICS_COLUMNS)
    assert len(lines) == 3
    drinking = lines[1].split(",")
    assert len(drinking) == len(METRICS_COLUMNS)
    assert drinking[7] == ""
    scratch = lines[2].split(",")
    assert scratch[7] == "-8.000000"

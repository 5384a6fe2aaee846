import json
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempofuse.data import (ScalerParams, SynthProfile, TimeSeriesFrame, WindowSpec,
                            apply_scaler, derive_calendar, fit_scaler, ingest_aspm,
                            ingest_swim_events, invert_scaler, make_windows,
                            split_train_test, synth_generate, write_aspm_csv,
                            write_swim_events)
from tempofuse.errors import DataError


def _write(path, text):
    path.write_text(text)
    return path


# -- calendar ---------------------------------------------------------------

def test_calendar_monday_row(tmp_path):
    f = ingest_aspm(_write(tmp_path / "a.csv", "slice_start_utc,dep_demand\n"
                                              "2019-01-07T13:45:00Z,12\n"))
    assert f.y[0] == 12
    assert tuple(f.calendar[0]) == (13, 4, 1, 1)


def test_calendar_examples():
    assert tuple(derive_calendar(np.datetime64("2019-06-30T00:00"))) == (0, 1, 7, 6)
    assert tuple(derive_calendar(np.datetime64("2019-06-30T23:45"))[:2]) == (23, 4)
    assert derive_calendar(np.datetime64("2019-06-30T12:30"))[1] == 3
    with pytest.raises(DataError, match="quarter-hour"):
        derive_calendar(np.datetime64("2019-06-30T12:31"))


def test_calendar_matches_datetime_oracle():
    rng = np.random.default_rng(7)
    base = datetime(1990, 1, 1)
    quarters = rng.integers(0, 60 * 365 * 96, size=10_000)
    stamps = [base + timedelta(minutes=15 * int(q)) for q in quarters]
    got = derive_calendar(np.array(stamps, dtype="datetime64[m]"))
    want = np.array([(s.hour, s.minute // 15 + 1, s.isoweekday(), s.month) for s in stamps])
    np.testing.assert_array_equal(got, want)


# -- ingestion --------------------------------------------------------------

HEADER = "slice_start_utc,dep_demand\n"


def test_ingest_errors(tmp_path):
    with pytest.raises(DataError, match="no rows"):
        ingest_aspm(_write(tmp_path / "e.csv", ""))
    with pytest.raises(DataError, match="no rows"):
        ingest_aspm(_write(tmp_path / "h.csv", HEADER))
    with pytest.raises(DataError, match="quarter-hour"):
        ingest_aspm(_write(tmp_path / "m.csv", HEADER + "2019-01-07T13:40:00Z,1\n"))
    with pytest.raises(DataError, match="duplicate"):
        ingest_aspm(_write(tmp_path / "d.csv", HEADER + "2019-01-07T13:45:00Z,1\n" * 2))
    with pytest.raises(DataError, match="negative"):
        ingest_aspm(_write(tmp_path / "n.csv", HEADER + "2019-01-07T13:45:00Z,-1\n"))
    with pytest.raises(DataError, match="header"):
        ingest_aspm(_write(tmp_path / "x.csv", "time,value\n2019-01-07T13:45:00Z,1\n"))


def test_ingest_gap_rejected_or_filled(tmp_path):
    path = _write(tmp_path / "g.csv", HEADER + "2019-01-07T13:00:00Z,1\n"
                                               "2019-01-07T13:45:00Z,2\n")
    with pytest.raises(DataError, match="gap of 2 bins"):
        ingest_aspm(path)
    f = ingest_aspm(path, max_gap_bins=2)
    np.testing.assert_array_equal(f.y, [1, 0, 0, 2])
    assert f.meta["filled_bins"] == 2


def test_swim_counts_half_open_bins_and_drops(tmp_path):
    frame = TimeSeriesFrame.from_arrays("2019-01-07T13:45", np.zeros(2))
    path = _write(tmp_path / "s.csv", "off_time\n"
                  "2019-01-07T13:45:00Z\n2019-01-07T13:50:00Z\n2019-01-07T13:59:59Z\n"
                  "2019-01-07T14:00:00Z\n2019-01-07T18:00:00Z\n")
    out = ingest_swim_events(path, frame)
    np.testing.assert_array_equal(out.observed["observed_departures"], [3, 1])
    assert out.meta["dropped_events"] == 1
    assert "observed_departures" not in frame.observed


def test_frame_rejects_irregular_spacing():
    bins = np.array(["2019-01-01T00:00", "2019-01-01T00:30"], dtype="datetime64[m]")
    with pytest.raises(DataError, match="15-minute"):
        TimeSeriesFrame(bins, [1.0, 2.0])


def test_aspm_round_trip(tmp_path):
    frame = synth_generate(SynthProfile(days=2)).frame
    write_aspm_csv(frame, tmp_path / "a.csv")
    back = ingest_aspm(tmp_path / "a.csv")
    np.testing.assert_array_equal(back.bin_start, frame.bin_start)
    np.testing.assert_array_equal(back.y, frame.y)


# -- scaler -----------------------------------------------------------------

def _frame(values, **observed):
    return TimeSeriesFrame.from_arrays("2019-01-01T00:00", np.asarray(values, float), observed)


def test_scaler_examples():
    f = _frame([0, 5, 10])
    p = fit_scaler(f)
    np.testing.assert_array_equal(apply_scaler(f, p).y, [0, 0.5, 1])
    c = _frame([7, 7, 7])
    pc = fit_scaler(c)
    scaled = apply_scaler(c, pc).y
    np.testing.assert_array_equal(scaled, [0, 0, 0])
    np.testing.assert_array_equal(invert_scaler(scaled, pc), [7, 7, 7])
    train, test = split_train_test(_frame([0, 5, 10, 20]), "2019-01-01T00:45")
    assert apply_scaler(test, fit_scaler(train)).y[0] == 2.0


def test_scaler_unfitted_and_double_apply():
    f = _frame([1, 2])
    with pytest.raises(DataError, match="unfitted"):
        apply_scaler(f, None)
    scaled = apply_scaler(f, fit_scaler(f))
    with pytest.raises(DataError):
        apply_scaler(scaled, fit_scaler(f))
    with pytest.raises(DataError):
        ScalerParams(("a",), (2.0,), (1.0,))


def test_scaler_fits_only_training_range():
    f = _frame([0, 1, 2, 100])
    p = fit_scaler(f, slice(0, 3))
    assert p.bounds("dep_demand") == (0.0, 2.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=50))
def test_scaler_round_trip(xs):
    x = np.array(xs)
    if np.ptp(x) == 0:
        return
    f = _frame(np.zeros(len(x)), demand_like=x)
    p = fit_scaler(f)
    scaled = apply_scaler(f, p).observed["demand_like"]
    assert np.max(np.abs(invert_scaler(scaled, p, "demand_like") - x)) <= 1e-12 * max(1.0, np.max(np.abs(x)))


# -- split and windows ------------------------------------------------------

def test_split_partition_and_errors():
    f = _frame(np.arange(96 * 3))
    train, test = split_train_test(f, "2019-01-02T00:00Z")
    assert len(train) + len(test) == len(f)
    assert train.bin_start[-1] < np.datetime64("2019-01-02T00:00") <= test.bin_start[0]
    with pytest.raises(DataError, match="empty"):
        split_train_test(f, "2019-01-01T00:00Z")
    with pytest.raises(DataError):
        split_train_test(f, "2020-01-01T00:00Z")


def test_window_examples():
    assert len(make_windows(_frame(np.arange(10)), WindowSpec(3, 2))) == 6
    assert len(make_windows(_frame([1.0, 2.0]), WindowSpec(1, 1))) == 1
    ds = make_windows(_frame(np.arange(10)), WindowSpec(3, 2))
    np.testing.assert_array_equal(ds.past_y[0], [0, 1, 2])
    np.testing.assert_array_equal(ds.labels[0], [3, 4])
    with pytest.raises(DataError, match="too short"):
        make_windows(_frame(np.arange(4)), WindowSpec(3, 2))
    with pytest.raises(DataError):
        WindowSpec(0, 1)


def test_window_blocks_align_with_frame():
    f = synth_generate(SynthProfile(days=2)).frame
    ds = make_windows(f, WindowSpec(5, 3))
    k = 17
    np.testing.assert_array_equal(ds.past_calendar[k], f.calendar[k:k + 5])
    np.testing.assert_array_equal(ds.future_calendar[k], f.calendar[k + 5:k + 8])
    np.testing.assert_array_equal(ds.past_observed[k, :, 0], f.observed["observed_departures"][k:k + 5])
    np.testing.assert_array_equal(ds.label_times()[k], f.bin_start[k + 5:k + 8])
    assert ds.issue_times[k] == f.bin_start[k + 4]


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 40))
def test_window_count_and_no_leakage(p, tau, extra):
    n = p + tau + extra
    ds = make_windows(_frame(np.arange(n, dtype=float)), WindowSpec(p, tau))
    assert len(ds) == n - p - tau + 1
    assert ds.check_no_leakage()
    np.testing.assert_array_equal(ds.labels[:, 0], ds.past_y[:, -1] + 1)


# -- synthetic --------------------------------------------------------------

def test_synth_is_deterministic():
    a = synth_generate(SynthProfile(seed=3, days=3))
    b = synth_generate(SynthProfile(seed=3, days=3))
    assert a.frame.y.tobytes() == b.frame.y.tobytes()
    assert a.events.tobytes() == b.events.tobytes()
    c = synth_generate(SynthProfile(seed=4, days=3))
    assert a.frame.y.tobytes() != c.frame.y.tobytes()


def test_synth_flat_noiseless():
    prof = SynthProfile(days=2, hourly_profile=[4.0] * 24, dow_multipliers=[1.0] * 7,
                        monthly_drift=0.0, noise=0.0, surge_probability=0.0)
    np.testing.assert_array_equal(synth_generate(prof).frame.y, np.full(192, 4.0))


def test_synth_rejects_negative_rates():
    with pytest.raises(DataError, match="negative"):
        synth_generate(SynthProfile(hourly_profile=[-1.0] + [1.0] * 23))
    with pytest.raises(DataError):
        synth_generate(SynthProfile(days=0))


def test_synth_event_round_trip(tmp_path):
    syn = synth_generate(SynthProfile(seed=11, days=5))
    write_swim_events(syn.events, tmp_path / "ev.csv")
    back = ingest_swim_events(tmp_path / "ev.csv", syn.frame.without_observed())
    np.testing.assert_array_equal(back.observed["observed_departures"],
                                  syn.frame.observed["observed_departures"])
    assert back.meta["dropped_events"] == 0


def test_synth_observed_correlates_with_demand():
    f = synth_generate(SynthProfile(seed=1, days=14)).frame
    assert np.all(f.y >= 0)
    assert np.corrcoef(f.y, f.observed["observed_departures"])[0, 1] > 0.5


def test_synth_profile_json(tmp_path):
    prof = SynthProfile(seed=9, days=1)
    path = tmp_path / "p.json"
    path.write_text(json.dumps(prof.to_dict()))
    assert SynthProfile.from_json(path) == prof
    with pytest.raises(DataError, match="unknown"):
        SynthProfile.from_dict({"bogus": 1})


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(0, 30), st.floats(0.1, 1.0))
def test_synth_event_file_round_trip_property(seed, days, delay, fraction):
    import tempfile
    from pathlib import Path
    syn = synth_generate(SynthProfile(seed=seed, days=days, max_delay_minutes=delay,
                                      departure_fraction=fraction))
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "ev.csv"
        write_swim_events(syn.events, path, comment="provenance line")
        back = ingest_swim_events(path, syn.frame.without_observed())
    np.testing.assert_array_equal(back.observed["observed_departures"],
                                  syn.frame.observed["observed_departures"])
    assert back.observed["observed_departures"].sum() == len(syn.events)


def test_synth_surges_add_to_demand():
    base = dict(days=3, hourly_profile=[4.0] * 24, dow_multipliers=[1.0] * 7,
                monthly_drift=0.0, noise=0.0)
    assert synth_generate(SynthProfile(**base)).frame.meta["surge_bins"] == 0
    surged = synth_generate(SynthProfile(**base, surge_probability=0.05, surge_magnitude=6.0))
    y, active = surged.frame.y, surged.frame.meta["surge_bins"]
    assert active > 0
    assert set(np.unique(y)) == {4.0, 10.0} and int((y == 10.0).sum()) == active

"""Forecasts re-issued every quarter hour, and hourly/daily aggregation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from tempofuse.data.frame import BIN, TimeSeriesFrame, format_utc
from tempofuse.data.windows import WindowedDataset, make_windows
from tempofuse.errors import DataError
from tempofuse.evaluation.metrics import compute_mae
from tempofuse.evaluation.report import model_frame
from tempofuse.models.base import Forecaster, ForecastResult, predict


@dataclass
class RollingForecastTrace:
    """One forecast per consecutive issue time.

    ``data_end[i]`` is the frame index of the last bin observed by forecast
    ``i``; ``truth[i]`` holds the realised demand for its horizons.
    """

    results: list[ForecastResult]
    truth: np.ndarray
    data_end: np.ndarray

    def __len__(self) -> int:
        return len(self.results)

    @property
    def issue_times(self) -> np.ndarray:
        return np.array([r.issue_time for r in self.results])

    def horizon_mae(self, horizon: int) -> float:
        h = horizon - 1
        pred = np.array([r.point[h] for r in self.results])
        return compute_mae(self.truth[:, h], pred)

    def to_csv(self) -> str:
        levels = self.results[0].quantile_levels
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["issue_time", "horizon", "bin_start", "y_true"]
                   + [f"q{round(q * 100):02d}" for q in levels])
        for r, truth in zip(self.results, self.truth):
            for h, t, row, y in zip(r.horizons, r.horizon_times, r.values, truth):
                w.writerow([format_utc(r.issue_time), int(h), format_utc(t), repr(float(y))]
                           + [repr(float(v)) for v in row])
        return buf.getvalue()


def rolling_forecast(model: Forecaster, frame: TimeSeriesFrame, start, end) -> RollingForecastTrace:
    """Issue a full-horizon forecast at every quarter hour in ``[start, end]``.

    The forecast issued at ``t`` observes bins up to and including the one
    starting at ``t``.
    """
    p, tau = model.spec.n_lag, model.spec.n_look_ahead
    first, last = frame.index_of(start), frame.index_of(end)
    if last < first:
        raise DataError("rolling window end precedes its start")
    if first - p + 1 < 0:
        raise DataError(f"insufficient history: {p} bins needed before {start}")
    if last + tau >= len(frame):
        raise DataError(f"frame ends before the horizon of the forecast issued at {end}")
    lo = first - p + 1
    scaled = model_frame(model, frame.slice(lo, last + tau + 1))
    ds = make_windows(scaled, model.spec)
    values = predict(model, ds)
    issue_idx = np.arange(first, last + 1)
    results = [ForecastResult(frame.bin_start[i], frame.bin_start[i] + BIN * np.arange(1, tau + 1),
                              model.quantile_levels, values[k])
               for k, i in enumerate(issue_idx)]
    truth = frame.y[issue_idx[:, None] + 1 + np.arange(tau)]
    return RollingForecastTrace(results, truth, issue_idx)


def issue_window(model: Forecaster, frame: TimeSeriesFrame, issue_time) -> WindowedDataset:
    """One-sample dataset for a forecast issued at ``issue_time``.

    Bins past the end of ``frame`` are padded with NaN demand; only their
    calendar features reach the model.
    """
    p, tau = model.spec.n_lag, model.spec.n_look_ahead
    i = frame.index_of(issue_time)
    if not 0 <= i < len(frame):
        raise DataError(f"issue time {issue_time} lies outside the data "
                        f"({format_utc(frame.start)} .. {format_utc(frame.bin_start[-1])})")
    if i - p + 1 < 0:
        raise DataError(f"insufficient history: {p} bins needed up to {issue_time}")
    part = frame.slice(i - p + 1, min(i + tau + 1, len(frame)))
    short = p + tau - len(part)
    if short > 0:
        pad = np.full(short, np.nan)
        part = TimeSeriesFrame.from_arrays(
            part.start, np.concatenate([part.y, pad]),
            {k: np.concatenate([v, pad]) for k, v in part.observed.items()})
    return make_windows(model_frame(model, part), model.spec)


_LEVELS = {"hour": 4, "day": 96}


def aggregate(bin_start, values, level: str) -> tuple[np.ndarray, np.ndarray]:
    """Sum quarter-hour values into complete hours or days.

    Returns ``(period_start, sums)``; periods missing any of their bins (at
    either end of the series) are dropped.
    """
    if level not in _LEVELS:
        raise ValueError(f"level must be 'hour' or 'day', got {level!r}")
    times = np.asarray(bin_start, dtype="datetime64[m]")
    values = np.asarray(values, dtype=np.float64)
    if times.size == 0:
        raise DataError("cannot aggregate an empty series")
    if values.shape[0] != times.size:
        raise DataError("values and timestamps differ in length")
    unit = "h" if level == "hour" else "D"
    periods = times.astype(f"datetime64[{unit}]")
    uniq, inverse, counts = np.unique(periods, return_inverse=True, return_counts=True)
    sums = np.zeros((uniq.size,) + values.shape[1:])
    np.add.at(sums, inverse, values)
    full = counts == _LEVELS[level]
    return uniq[full].astype("datetime64[m]"), sums[full]


def aggregated_mae(bin_start, y_true, y_pred, level: str) -> float:
    """Mean absolute error recomputed on the aggregated series."""
    _, t = aggregate(bin_start, y_true, level)
    _, p = aggregate(bin_start, y_pred, level)
    return compute_mae(t, p)

"""Sliding-window conversion of a frame into supervised samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from tempofuse.data.frame import BIN, TimeSeriesFrame
from tempofuse.data.scaling import ScalerParams
from tempofuse.errors import DataError


@dataclass(frozen=True)
class WindowSpec:
    n_lag: int
    n_look_ahead: int

    def __post_init__(self):
        if int(self.n_lag) < 1 or int(self.n_look_ahead) < 1:
            raise DataError(f"window needs n_lag >= 1 and n_look_ahead >= 1, "
                            f"got {self.n_lag}, {self.n_look_ahead}")

    @property
    def total(self) -> int:
        return self.n_lag + self.n_look_ahead


@dataclass(frozen=True)
class WindowedDataset:
    """Samples of past block, future-known block and labels.

    Arrays are indexed by sample first:

    past_y          (n, p)       target over the past block
    past_observed   (n, p, k)    observed inputs over the past block
    past_calendar   (n, p, 4)    calendar values over the past block
    future_calendar (n, tau, 4)  calendar values over the label block
    labels          (n, tau)     target over the label block
    starts          (n,)         frame index of each sample's first past bin
    """

    spec: WindowSpec
    past_y: np.ndarray
    past_observed: np.ndarray
    past_calendar: np.ndarray
    future_calendar: np.ndarray
    labels: np.ndarray
    starts: np.ndarray
    origin: np.datetime64
    observed_names: tuple[str, ...]
    scaler: ScalerParams | None = None

    def __len__(self) -> int:
        return len(self.starts)

    @property
    def issue_times(self) -> np.ndarray:
        """Start of each sample's last observed bin; horizon h falls at issue + h bins."""
        return self.origin + BIN * (self.starts + self.spec.n_lag - 1)

    def past_times(self) -> np.ndarray:
        return self.origin + BIN * (self.starts[:, None] + np.arange(self.spec.n_lag))

    def label_times(self) -> np.ndarray:
        offs = self.spec.n_lag + np.arange(self.spec.n_look_ahead)
        return self.origin + BIN * (self.starts[:, None] + offs)

    def subset(self, index) -> "WindowedDataset":
        return WindowedDataset(self.spec, self.past_y[index], self.past_observed[index],
                               self.past_calendar[index], self.future_calendar[index],
                               self.labels[index], self.starts[index], self.origin,
                               self.observed_names, self.scaler)

    def check_no_leakage(self) -> bool:
        if len(self) == 0:
            return True
        return bool(np.all(self.past_times().max(axis=1) < self.label_times().min(axis=1)))


def make_windows(frame: TimeSeriesFrame, spec: WindowSpec, stride: int = 1) -> WindowedDataset:
    """Slide a window of ``n_lag + n_look_ahead`` bins over the frame.

    Sample ``k`` has past bins ``[k, k+p)`` and label bins ``[k+p, k+p+tau)``.
    ``stride`` keeps every ``stride``-th sample.
    """
    p, tau = spec.n_lag, spec.n_look_ahead
    n = len(frame)
    if n < p + tau:
        raise DataError(f"frame of {n} bins is too short for n_lag={p} + n_look_ahead={tau}")
    count = n - p - tau + 1
    starts = np.arange(0, count, stride)

    def windows(values, length, offset):
        # windows over the leading axis; returned as (count, length, ...)
        view = sliding_window_view(values[offset:offset + count + length - 1], length, axis=0)
        view = np.moveaxis(view, -1, 1)
        return np.ascontiguousarray(view[starts])

    observed = (np.stack([frame.observed[k] for k in frame.observed_names], axis=-1)
                if frame.observed else np.zeros((n, 0)))
    return WindowedDataset(
        spec=spec,
        past_y=windows(frame.y, p, 0),
        past_observed=windows(observed, p, 0),
        past_calendar=windows(frame.calendar, p, 0),
        future_calendar=windows(frame.calendar, tau, p),
        labels=windows(frame.y, tau, p),
        starts=starts,
        origin=frame.start,
        observed_names=frame.observed_names,
        scaler=frame.scaler,
    )

"""Min-max scaling of numeric columns fitted on the training split."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from tempofuse.data.frame import TARGET, TimeSeriesFrame
from tempofuse.errors import DataError


@dataclass(frozen=True)
class ScalerParams:
    columns: tuple[str, ...]
    minimum: tuple[float, ...]
    maximum: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.columns) == len(self.minimum) == len(self.maximum)):
            raise DataError("scaler columns, minimum and maximum differ in length")
        for name, lo, hi in zip(self.columns, self.minimum, self.maximum):
            if hi < lo:
                raise DataError(f"scaler column {name!r} has max {hi} < min {lo}")

    def bounds(self, column: str) -> tuple[float, float]:
        try:
            i = self.columns.index(column)
        except ValueError:
            raise DataError(f"scaler was not fitted on column {column!r}") from None
        return self.minimum[i], self.maximum[i]

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "minimum": list(self.minimum),
                "maximum": list(self.maximum)}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(tuple(d["columns"]), tuple(float(v) for v in d["minimum"]),
                   tuple(float(v) for v in d["maximum"]))


def fit_scaler(frame: TimeSeriesFrame, training_range: slice | None = None) -> ScalerParams:
    """Per-column min and max over the training rows (all rows by default)."""
    if frame.scaler is not None:
        raise DataError("cannot fit a scaler on an already scaled frame")
    rows = training_range if training_range is not None else slice(None)
    cols = frame.numeric_columns
    lows, highs = [], []
    for name in cols:
        values = frame.column(name)[rows]
        if values.size == 0:
            raise DataError("cannot fit a scaler on zero rows")
        lows.append(float(values.min()))
        highs.append(float(values.max()))
    return ScalerParams(cols, tuple(lows), tuple(highs))


def scale_values(values, params: ScalerParams | None, column: str = TARGET) -> np.ndarray:
    if params is None:
        raise DataError("applying an unfitted scaler")
    lo, hi = params.bounds(column)
    values = np.asarray(values, dtype=np.float64)
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def invert_scaler(values, params: ScalerParams | None, column: str = TARGET) -> np.ndarray:
    if params is None:
        raise DataError("inverting with an unfitted scaler")
    lo, hi = params.bounds(column)
    values = np.asarray(values, dtype=np.float64)
    return values * (hi - lo) + lo


def apply_scaler(frame: TimeSeriesFrame, params: ScalerParams | None) -> TimeSeriesFrame:
    """Scale every numeric column; values outside the fitted range extrapolate."""
    if params is None:
        raise DataError("applying an unfitted scaler")
    if frame.scaler is not None:
        raise DataError("frame is already scaled")
    observed = {k: scale_values(v, params, k) for k, v in frame.observed.items()}
    return replace(frame, y=scale_values(frame.y, params, TARGET), observed=observed,
                   scaler=params, meta=dict(frame.meta))


def unscale_frame(frame: TimeSeriesFrame) -> TimeSeriesFrame:
    if frame.scaler is None:
        return frame
    p = frame.scaler
    observed = {k: invert_scaler(v, p, k) for k, v in frame.observed.items()}
    return replace(frame, y=invert_scaler(frame.y, p), observed=observed, scaler=None,
                   meta=dict(frame.meta))

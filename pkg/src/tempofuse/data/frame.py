"""Quarter-hour time-series frames, calendar features and CSV ingestion."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import TYPE_CHECKING, Mapping

import numpy as np

from tempofuse.errors import DataError

if TYPE_CHECKING:
    from tempofuse.data.scaling import ScalerParams

logger = logging.getLogger(__name__)

BIN = np.timedelta64(15, "m")
TARGET = "dep_demand"
OBSERVED_DEPARTURES = "observed_departures"
CALENDAR_COLUMNS = ("hour", "qtr", "day_of_week", "month")
# subtract from raw calendar values to get 0-based embedding indices
CALENDAR_OFFSETS = np.array([0, 1, 1, 1])

ASPM_HEADER = ["slice_start_utc", "dep_demand"]
SWIM_HEADER = ["off_time"]


def parse_utc(text: str, unit: str = "m") -> np.datetime64:
    """Parse an ISO-8601 UTC timestamp (``Z``, ``+00:00`` or naive)."""
    raw = text.strip()
    try:
        stamp = datetime.fromisoformat(raw[:-1] + "+00:00" if raw.endswith("Z") else raw)
    except ValueError:
        raise DataError(f"unparseable timestamp {text!r}") from None
    if stamp.tzinfo is not None:
        stamp = stamp.astimezone(timezone.utc).replace(tzinfo=None)
    exact = np.datetime64(stamp, "us")
    value = exact.astype(f"datetime64[{unit}]")
    if unit == "m" and value.astype("datetime64[us]") != exact:
        raise DataError(f"timestamp {text!r} carries seconds")
    return value


def to_datetime64(value) -> np.datetime64:
    if isinstance(value, np.datetime64):
        return value.astype("datetime64[m]")
    if isinstance(value, str):
        return parse_utc(value)
    if isinstance(value, datetime):
        if value.tzinfo is not None:
            value = value.astimezone(timezone.utc).replace(tzinfo=None)
        return np.datetime64(value, "m")
    raise TypeError(f"cannot interpret {value!r} as a timestamp")


def format_utc(ts: np.datetime64) -> str:
    return str(np.datetime64(ts, "s")) + "Z"


def derive_calendar(bin_start) -> np.ndarray:
    """Calendar features of quarter-hour aligned timestamps.

    Returns integer columns ``(hour, qtr, day_of_week, month)`` with hour in
    0-23, qtr = minute // 15 + 1, ISO day of week (Monday = 1) and month 1-12.
    A scalar input yields shape ``(4,)``, an array ``(N, 4)``.
    """
    ts = np.asarray(bin_start)
    if ts.dtype.kind != "M":
        ts = np.asarray([to_datetime64(t) for t in np.atleast_1d(ts)]).reshape(ts.shape)
    seconds = ts.astype("datetime64[s]").astype(np.int64)
    if np.any(seconds % (15 * 60)):
        bad = ts.ravel()[np.flatnonzero(seconds.ravel() % (15 * 60))[0]]
        raise DataError(f"timestamp {bad} is not on a quarter-hour boundary")
    minutes = seconds // 60
    hour = (minutes // 60) % 24
    qtr = (minutes % 60) // 15 + 1
    days = minutes // (24 * 60)
    dow = (days + 3) % 7 + 1          # 1970-01-01 was a Thursday
    month = ts.astype("datetime64[M]").astype(np.int64) % 12 + 1
    return np.stack([hour, qtr, dow, month], axis=-1).astype(np.int64)


@dataclass(frozen=True)
class TimeSeriesFrame:
    """Gap-free quarter-hour record of target, observed and calendar inputs.

    ``observed`` maps column names to arrays aligned with ``bin_start``.
    ``scaler`` is set when the numeric columns hold min-max scaled values.
    """

    bin_start: np.ndarray
    y: np.ndarray
    observed: Mapping[str, np.ndarray] = field(default_factory=dict)
    scaler: "ScalerParams | None" = None
    meta: dict = field(default_factory=dict, compare=False)
    calendar: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bins = np.asarray(self.bin_start, dtype="datetime64[m]")
        y = np.asarray(self.y, dtype=np.float64)
        if bins.ndim != 1 or y.shape != bins.shape:
            raise DataError("bin_start and y must be 1-D arrays of equal length")
        if len(bins) > 1 and np.any(np.diff(bins) != BIN):
            raise DataError("bin_start must be strictly increasing with 15-minute spacing")
        observed = {}
        for name, col in self.observed.items():
            col = np.asarray(col, dtype=np.float64)
            if col.shape != bins.shape:
                raise DataError(f"observed column {name!r} has length {len(col)}, "
                                f"expected {len(bins)}")
            observed[name] = col
        object.__setattr__(self, "bin_start", bins)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "observed", observed)
        object.__setattr__(self, "calendar", derive_calendar(bins) if len(bins) else
                           np.zeros((0, 4), dtype=np.int64))

    @classmethod
    def from_arrays(cls, start, y, observed: Mapping[str, np.ndarray] | None = None,
                    **kwargs) -> "TimeSeriesFrame":
        start = to_datetime64(start)
        bins = start + BIN * np.arange(len(y))
        return cls(bins, y, dict(observed or {}), **kwargs)

    def __len__(self) -> int:
        return len(self.bin_start)

    @property
    def start(self) -> np.datetime64:
        return self.bin_start[0]

    @property
    def end(self) -> np.datetime64:
        """Exclusive end: start of the bin after the last one."""
        return self.bin_start[-1] + BIN

    @property
    def observed_names(self) -> tuple[str, ...]:
        return tuple(self.observed)

    @property
    def numeric_columns(self) -> tuple[str, ...]:
        return (TARGET,) + self.observed_names

    def column(self, name: str) -> np.ndarray:
        return self.y if name == TARGET else self.observed[name]

    def index_of(self, ts) -> int:
        """Index of the bin starting at ``ts`` (may fall outside ``[0, N)``)."""
        delta = to_datetime64(ts) - self.start
        if delta % BIN:
            raise DataError(f"{ts} is not on a quarter-hour boundary")
        return int(delta // BIN)

    def slice(self, start: int, stop: int) -> "TimeSeriesFrame":
        return TimeSeriesFrame(self.bin_start[start:stop], self.y[start:stop],
                               {k: v[start:stop] for k, v in self.observed.items()},
                               self.scaler, dict(self.meta))

    def with_observed(self, name: str, values: np.ndarray) -> "TimeSeriesFrame":
        observed = dict(self.observed)
        observed[name] = values
        return replace(self, observed=observed)

    def without_observed(self) -> "TimeSeriesFrame":
        return replace(self, observed={})


def split_train_test(frame: TimeSeriesFrame, boundary) -> tuple[TimeSeriesFrame, TimeSeriesFrame]:
    """Chronological split: train is strictly before ``boundary``, test at/after."""
    b = to_datetime64(boundary)
    cut = int(np.searchsorted(frame.bin_start, b, side="left"))
    if cut == 0 or cut == len(frame):
        raise DataError(f"split boundary {b} leaves an empty side "
                        f"(frame covers {frame.start} .. {frame.bin_start[-1]})")
    return frame.slice(0, cut), frame.slice(cut, len(frame))


def _open_rows(path: Path, header: list[str]):
    with open(path, newline="", encoding="utf-8") as fh:
        # leading "#" lines carry provenance comments, not data
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        first = next(reader, None)
        if first is None:
            raise DataError(f"{path}: no rows")
        if [c.strip() for c in first] != header:
            raise DataError(f"{path}: expected header {','.join(header)!r}, "
                            f"got {','.join(first)!r}")
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: no rows")
    return rows


def ingest_aspm(path, max_gap_bins: int = 0) -> TimeSeriesFrame:
    """Read a daily-batch demand CSV (``slice_start_utc,dep_demand``).

    Gaps of up to ``max_gap_bins`` missing bins are zero-filled; larger gaps,
    duplicates, misaligned timestamps and negative demand raise ``DataError``.
    """
    path = Path(path)
    rows = _open_rows(path, ASPM_HEADER)
    stamps, demand = [], []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
        ts = parse_utc(row[0])
        if ts.astype(np.int64) % 15:
            raise DataError(f"{path}:{lineno}: {row[0]} is not on a quarter-hour boundary")
        try:
            value = float(row[1])
        except ValueError:
            raise DataError(f"{path}:{lineno}: demand {row[1]!r} is not a number") from None
        if not np.isfinite(value) or value < 0:
            raise DataError(f"{path}:{lineno}: negative or non-finite demand {row[1]}")
        stamps.append(ts)
        demand.append(value)
    stamps = np.array(stamps, dtype="datetime64[m]")
    demand = np.array(demand)
    order = np.argsort(stamps, kind="stable")
    stamps, demand = stamps[order], demand[order]
    steps = np.diff(stamps) // BIN
    if np.any(steps == 0):
        dup = stamps[1:][steps == 0][0]
        raise DataError(f"{path}: duplicate bin {format_utc(dup)}")
    if np.any(steps - 1 > max_gap_bins):
        i = int(np.flatnonzero(steps - 1 > max_gap_bins)[0])
        raise DataError(f"{path}: gap of {int(steps[i]) - 1} bins after "
                        f"{format_utc(stamps[i])} exceeds limit {max_gap_bins}")
    n = int((stamps[-1] - stamps[0]) // BIN) + 1
    filled = np.zeros(n)
    filled[((stamps - stamps[0]) // BIN).astype(np.int64)] = demand
    frame = TimeSeriesFrame.from_arrays(stamps[0], filled)
    frame.meta["source"] = str(path)
    frame.meta["filled_bins"] = n - len(stamps)
    return frame


def count_events(frame: TimeSeriesFrame, events: np.ndarray) -> tuple[np.ndarray, int]:
    """Count event timestamps into the frame's half-open bins."""
    offsets = events.astype("datetime64[s]") - frame.start.astype("datetime64[s]")
    idx = np.floor_divide(offsets.astype(np.int64), 15 * 60)
    inside = (idx >= 0) & (idx < len(frame))
    counts = np.bincount(idx[inside], minlength=len(frame)).astype(np.float64)
    return counts, int((~inside).sum())


def read_swim_events(path) -> np.ndarray:
    path = Path(path)
    rows = _open_rows(path, SWIM_HEADER)
    return np.array([parse_utc(r[0], unit="s") for r in rows], dtype="datetime64[s]")


def ingest_swim_events(path, frame: TimeSeriesFrame) -> TimeSeriesFrame:
    """Aggregate minute-stream departure events (``off_time``) into the frame.

    Events outside the frame are dropped and counted in
    ``meta["dropped_events"]``.
    """
    counts, dropped = count_events(frame, read_swim_events(path))
    if dropped:
        logger.warning("%s: dropped %d events outside the frame range", path, dropped)
    out = frame.with_observed(OBSERVED_DEPARTURES, counts)
    out.meta["dropped_events"] = dropped
    return out


def _comment(fh, comment: str | None) -> None:
    for line in (comment or "").splitlines():
        fh.write(f"# {line}\n")


def write_aspm_csv(frame: TimeSeriesFrame, path, comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _comment(fh, comment)
        w = csv.writer(fh)
        w.writerow(ASPM_HEADER)
        for ts, v in zip(frame.bin_start, frame.y):
            w.writerow([format_utc(ts), repr(float(v)) if v != int(v) else int(v)])


def write_swim_events(events: np.ndarray, path, comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _comment(fh, comment)
        w = csv.writer(fh)
        w.writerow(SWIM_HEADER)
        for ts in events:
            w.writerow([format_utc(ts)])

"""Synthetic airport departure demand with a correlated minute event stream."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np

from tempofuse.data.frame import (BIN, OBSERVED_DEPARTURES, TimeSeriesFrame, count_events,
                                  to_datetime64)
from tempofuse.errors import DataError

# Quarter-hour departure rate per UTC hour: a quiet night and several
# departure banks through the local day.
DEFAULT_HOURLY_PROFILE = [
    6.0, 5.0, 4.0, 3.0, 2.0, 1.5, 1.0, 0.8, 0.8, 0.8, 1.0, 1.5,
    3.0, 6.0, 9.0, 8.0, 7.0, 8.0, 10.0, 9.0, 7.0, 8.0, 9.0, 7.0,
]
DEFAULT_DOW_MULTIPLIERS = [1.05, 0.95, 0.95, 1.0, 1.1, 1.0, 0.95]


@dataclass
class SynthProfile:
    seed: int = 42
    days: int = 104
    start_date: str = "2019-09-17"
    hourly_profile: list[float] = field(default_factory=lambda: list(DEFAULT_HOURLY_PROFILE))
    dow_multipliers: list[float] = field(default_factory=lambda: list(DEFAULT_DOW_MULTIPLIERS))
    monthly_drift: float = 0.01
    noise: float = 1.0
    surge_probability: float = 0.0
    surge_magnitude: float = 6.0
    surge_duration: int = 8
    noise_kind: str = "poisson"
    departure_fraction: float = 0.9
    max_delay_minutes: int = 10

    def validate(self) -> None:
        if int(self.days) < 1:
            raise DataError(f"days must be >= 1, got {self.days}")
        if len(self.hourly_profile) != 24 or len(self.dow_multipliers) != 7:
            raise DataError("hourly_profile needs 24 rates and dow_multipliers 7 values")
        if min(self.hourly_profile) < 0 or min(self.dow_multipliers) < 0:
            raise DataError("invalid profile: negative rates")
        if self.noise < 0 or self.surge_magnitude < 0:
            raise DataError("invalid profile: negative noise or surge magnitude")
        if not 0 <= self.surge_probability <= 1 or not 0 <= self.departure_fraction <= 1:
            raise DataError("surge_probability and departure_fraction must lie in [0, 1]")
        if self.noise_kind not in ("poisson", "gaussian"):
            raise DataError(f"unknown noise_kind {self.noise_kind!r}")
        if self.surge_duration < 1 or self.max_delay_minutes < 0:
            raise DataError("surge_duration must be >= 1 and max_delay_minutes >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthProfile":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown profile fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SynthProfile":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


class SyntheticAirport(NamedTuple):
    frame: TimeSeriesFrame
    events: np.ndarray


def expected_rate(profile: SynthProfile, calendar: np.ndarray) -> np.ndarray:
    """Noise-free demand for each bin before surges."""
    hour, _, dow, month = calendar.T
    hourly = np.asarray(profile.hourly_profile, dtype=np.float64)
    dow_mult = np.asarray(profile.dow_multipliers, dtype=np.float64)
    return hourly[hour] * dow_mult[dow - 1] * (1.0 + profile.monthly_drift * (month - 1))


def synth_generate(profile: SynthProfile | None = None, **overrides) -> SyntheticAirport:
    """Generate a quarter-hour demand frame and its minute-resolution events.

    Demand is the bank profile times the day-of-week multiplier and monthly
    drift, plus optional surges (off by default) lasting ``surge_duration``
    bins that each add ``surge_magnitude`` to the rate, with Poisson (or
    Gaussian) noise scaled by ``noise``.  Each demanded aircraft departs with
    probability ``departure_fraction`` after a random delay; the resulting
    events are binned into ``observed_departures``.
    """
    profile = profile or SynthProfile()
    if overrides:
        profile = SynthProfile.from_dict({**profile.to_dict(), **overrides})
    profile.validate()
    n = int(profile.days) * 96
    start = to_datetime64(profile.start_date)
    bins = start + BIN * np.arange(n)
    frame = TimeSeriesFrame(bins, np.zeros(n))
    # separate streams so enabling one component leaves the others unchanged
    surge_rng, noise_rng, event_rng = (np.random.default_rng([profile.seed, k]) for k in range(3))

    rate = expected_rate(profile, frame.calendar)
    onsets = np.flatnonzero(surge_rng.random(n) < profile.surge_probability)
    active = np.zeros(n, dtype=bool)
    for i in onsets:
        active[i:i + profile.surge_duration] = True
    rate = rate + profile.surge_magnitude * active

    if profile.noise_kind == "poisson":
        y = rate + profile.noise * (noise_rng.poisson(rate) - rate)
    else:
        y = rate + profile.noise * noise_rng.standard_normal(n)
    y = np.maximum(y, 0.0)

    aircraft = np.rint(y).astype(np.int64)
    departing = event_rng.binomial(aircraft, profile.departure_fraction)
    owner = np.repeat(np.arange(n), departing)
    minute_in_bin = event_rng.integers(0, 15, size=owner.size)
    delay = event_rng.integers(0, profile.max_delay_minutes + 1, size=owner.size)
    events = (bins[owner] + (minute_in_bin + delay).astype("timedelta64[m]")).astype("datetime64[s]")
    events = np.sort(events[events < frame.end])

    counts, _ = count_events(frame, events)
    out = TimeSeriesFrame(bins, y, {OBSERVED_DEPARTURES: counts},
                          meta={"source": "synthetic", "seed": profile.seed,
                                "surge_bins": int(active.sum())})
    return SyntheticAirport(out, events)

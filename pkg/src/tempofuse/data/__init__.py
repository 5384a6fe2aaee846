"""Ingestion, calendar features, scaling, splitting and windowing."""

from tempofuse.data.frame import (BIN, CALENDAR_COLUMNS, OBSERVED_DEPARTURES, TARGET,
                                  TimeSeriesFrame, derive_calendar, ingest_aspm,
                                  ingest_swim_events, split_train_test, write_aspm_csv,
                                  write_swim_events)
from tempofuse.data.scaling import (ScalerParams, apply_scaler, fit_scaler, invert_scaler,
                                    scale_values)
from tempofuse.data.synth import SynthProfile, SyntheticAirport, synth_generate
from tempofuse.data.windows import WindowedDataset, WindowSpec, make_windows

__all__ = [
    "BIN", "CALENDAR_COLUMNS", "OBSERVED_DEPARTURES", "TARGET", "TimeSeriesFrame",
    "derive_calendar", "ingest_aspm", "ingest_swim_events", "split_train_test",
    "write_aspm_csv", "write_swim_events", "ScalerParams", "apply_scaler", "fit_scaler",
    "invert_scaler", "scale_values", "SynthProfile", "SyntheticAirport", "synth_generate",
    "WindowedDataset", "WindowSpec", "make_windows",
]

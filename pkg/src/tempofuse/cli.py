"""Command-line entry point binding data, models and reports end to end.

Configuration is one JSON document (``--config``) with ``--set key=value``
overrides; dotted keys reach into nested sections (``--set train.epochs=3``).
Every artifact records the hash of the configuration that produced it.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from tempofuse.data import (OBSERVED_DEPARTURES, SynthProfile, TimeSeriesFrame, WindowSpec,
                            ingest_aspm, ingest_swim_events, make_windows, synth_generate,
                            write_aspm_csv, write_swim_events)
from tempofuse.data.frame import to_datetime64
from tempofuse.errors import CheckpointError, DataError, NumericError, TempofuseError
from tempofuse.evaluation import (attention_by_lag, issue_window, plot_csv, report_from_scores,
                                  rolling_forecast, score_windows, variable_importance)
from tempofuse.evaluation.report import model_frame
from tempofuse.experiment import COMPARISON_PLAN, fit_model, run_comparison
from tempofuse.models import ForecasterKind, default_window, forecast
from tempofuse.models.checkpoint import checkpoint_load, checkpoint_save
from tempofuse.models.tft import TemporalFusionTransformer
from tempofuse.training import TrainConfig

logger = logging.getLogger("tempofuse")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    """Bad command line or configuration document."""


@dataclass
class RunConfig:
    """Everything one invocation needs.

    Data comes either from files (``aspm`` plus optional ``swim`` events) or
    from a synthetic profile (``synthetic``, a dict of profile overrides);
    with neither set the default synthetic airport is used.  ``seed`` feeds
    the synthetic generator and every training run.  ``compare`` holds
    per-row overrides keyed by model kind, or ``"tft+events"`` for the row
    that uses the event stream; its ``"with_events"`` entry (default true)
    toggles that row.
    """

    aspm: str | None = None
    swim: str | None = None
    synthetic: dict | None = None
    model: str = "tft"
    with_events: bool = False
    n_lag: int | None = None
    n_look_ahead: int | None = None
    train: dict = field(default_factory=dict)
    compare: dict = field(default_factory=dict)
    split: str = "2019-12-16T00:00Z"
    output: str = "tempofuse-out"
    seed: int = 42
    checkpoint: str | None = None
    issue_time: str | None = None
    rolling_start: str | None = None
    rolling_end: str | None = None
    plot_horizon: int = 1
    max_gap_bins: int = 0

    def __post_init__(self):
        if self.aspm is not None and self.synthetic is not None:
            raise UsageError("configure either aspm files or a synthetic profile, not both")
        if self.swim is not None and self.aspm is None:
            raise UsageError("swim events need an aspm file to align with")
        if self.aspm is None and self.synthetic is None:
            self.synthetic = {}
        if self.synthetic is not None:
            if "seed" in self.synthetic:
                raise UsageError("set the top-level seed rather than synthetic.seed")
            try:
                self.profile()
            except DataError as exc:
                raise UsageError(f"bad synthetic profile: {exc}") from None
        try:
            ForecasterKind(self.model)
        except ValueError:
            kinds = ", ".join(k.value for k in ForecasterKind)
            raise UsageError(f"unknown model {self.model!r} (choose from {kinds})") from None
        self.train_config()
        for key in self.compare:
            if key != "with_events" and self._row_key(key) is None:
                raise UsageError(f"unknown compare row {key!r}")

    @staticmethod
    def _row_key(key: str):
        kind, _, suffix = key.partition("+")
        if suffix not in ("", "events"):
            return None
        try:
            return ForecasterKind(kind), suffix == "events"
        except ValueError:
            return None

    def to_dict(self) -> dict:
        return asdict(self)

    def content_dict(self) -> dict:
        """Settings that determine artifact contents (locations excluded)."""
        return {k: v for k, v in self.to_dict().items() if k not in ("output", "checkpoint")}

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.content_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @property
    def kind(self) -> ForecasterKind:
        return ForecasterKind(self.model)

    def profile(self) -> SynthProfile:
        return SynthProfile.from_dict({**self.synthetic, "seed": self.seed})

    def _row_overrides(self, kind, with_events) -> dict:
        for key, value in self.compare.items():
            if key != "with_events" and self._row_key(key) == (ForecasterKind(kind), with_events):
                return dict(value)
        return {}

    def train_config(self, kind=None, with_events=False) -> TrainConfig:
        values = {**self.train, "seed": self.seed}
        if kind is not None:
            row = self._row_overrides(kind, with_events)
            values.update({k: v for k, v in row.items() if k not in ("n_lag", "n_look_ahead")})
        if "quantile_levels" in values:
            values["quantile_levels"] = tuple(values["quantile_levels"])
        try:
            return TrainConfig(**values)
        except TypeError as exc:
            raise UsageError(f"bad training settings: {exc}") from None

    def window(self, kind=None, with_events=None, row=False) -> WindowSpec:
        kind = self.kind if kind is None else ForecasterKind(kind)
        with_events = self.with_events if with_events is None else with_events
        spec = default_window(kind, with_events)
        lag, ahead = spec.n_lag, spec.n_look_ahead
        source = self._row_overrides(kind, with_events) if row else \
            {"n_lag": self.n_lag, "n_look_ahead": self.n_look_ahead}
        lag = source.get("n_lag") or lag
        ahead = source.get("n_look_ahead") or ahead
        return WindowSpec(int(lag), int(ahead))

    @property
    def out_dir(self) -> Path:
        path = Path(self.output)
        path.mkdir(parents=True, exist_ok=True)
        return path

    @property
    def checkpoint_path(self) -> Path:
        return Path(self.checkpoint) if self.checkpoint else Path(self.output) / "model.json"


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config(path: str | None, overrides=(), **direct) -> RunConfig:
    doc: dict = {}
    if path:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise UsageError(f"config {path} must hold a JSON object")
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects key=value, got {item!r}")
        *parents, leaf = key.split(".")
        node = doc
        for part in parents:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise UsageError(f"--set {key}: {part} is not a section")
        node[leaf] = _parse_value(raw)
    doc.update({k: v for k, v in direct.items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return RunConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad configuration: {exc}") from None


# -- data -------------------------------------------------------------------

def load_frame(cfg: RunConfig) -> TimeSeriesFrame:
    if cfg.aspm is not None:
        frame = ingest_aspm(cfg.aspm, cfg.max_gap_bins)
        return ingest_swim_events(cfg.swim, frame) if cfg.swim else frame
    return synth_generate(cfg.profile()).frame


def _has_events(frame: TimeSeriesFrame) -> bool:
    return OBSERVED_DEPARTURES in frame.observed_names


def _test_windows(model, frame: TimeSeriesFrame, split):
    ds = make_windows(model_frame(model, frame), model.spec)
    keep = np.flatnonzero(ds.label_times()[:, 0] >= to_datetime64(split))
    if keep.size == 0:
        raise DataError("no complete evaluation window in the test range")
    return ds.subset(keep)


# -- artifacts --------------------------------------------------------------

def _write_json(path: Path, cfg: RunConfig, payload: dict) -> Path:
    path.write_text(json.dumps({"config_hash": cfg.config_hash, **payload}, indent=2) + "\n")
    return path


def _write_csv(path: Path, cfg: RunConfig, text: str) -> Path:
    path.write_text(f"# config_hash: {cfg.config_hash}\n{text}")
    return path


def _load_model(cfg: RunConfig):
    return checkpoint_load(cfg.checkpoint_path)


# -- subcommands ------------------------------------------------------------

def cmd_synth(cfg: RunConfig, args) -> list[Path]:
    if cfg.synthetic is None:
        raise UsageError("synth needs a synthetic profile, not aspm files")
    profile = cfg.profile()
    airport = synth_generate(profile)
    out = cfg.out_dir
    comment = f"config_hash: {cfg.config_hash}"
    write_aspm_csv(airport.frame, out / "aspm.csv", comment)
    write_swim_events(airport.events, out / "swim_events.csv", comment)
    return [out / "aspm.csv", out / "swim_events.csv",
            _write_json(out / "profile.json", cfg, {"profile": profile.to_dict()})]


def cmd_train(cfg: RunConfig, args) -> list[Path]:
    frame = load_frame(cfg)
    if cfg.with_events and not _has_events(frame):
        raise DataError("with_events is set but the data has no event stream")
    model = fit_model(cfg.kind, frame, cfg.split, cfg.with_events,
                      cfg.train_config(), cfg.window())
    out = cfg.out_dir
    cfg.checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
    checkpoint_save(model, cfg.checkpoint_path,
                    extra={"config_hash": cfg.config_hash, "config": cfg.content_dict()})
    report = model.last_report.to_dict(include_time=False) \
        if getattr(model, "last_report", None) else {}
    return [cfg.checkpoint_path,
            _write_json(out / "train_report.json", cfg,
                        {"model": model.kind.label, "report": report})]


def cmd_evaluate(cfg: RunConfig, args) -> list[Path]:
    model = _load_model(cfg)
    scores = score_windows(model, load_frame(cfg), cfg.split)
    report = report_from_scores(model, scores)
    out = cfg.out_dir
    logger.info("%s on %s: mse %.4f mae %.4f", report.model, report.data, report.mse, report.mae)
    return [_write_json(out / "eval_report.json", cfg, {"report": report.to_dict()}),
            _write_csv(out / "plot.csv", cfg, plot_csv(scores, cfg.plot_horizon))]


def cmd_forecast(cfg: RunConfig, args) -> list[Path]:
    if cfg.issue_time is None:
        raise UsageError("forecast needs an issue time (--issue-time or issue_time)")
    model = _load_model(cfg)
    ds = issue_window(model, load_frame(cfg), cfg.issue_time)
    result = forecast(model, ds, 0)
    return [_write_json(cfg.out_dir / "forecast.json", cfg, {"forecast": result.to_dict()})]


def cmd_rolling(cfg: RunConfig, args) -> list[Path]:
    if cfg.rolling_start is None or cfg.rolling_end is None:
        raise UsageError("rolling needs --start and --end (or rolling_start/rolling_end)")
    model = _load_model(cfg)
    trace = rolling_forecast(model, load_frame(cfg), cfg.rolling_start, cfg.rolling_end)
    logger.info("horizon 1 mae %.4f, horizon %d mae %.4f", trace.horizon_mae(1),
                model.spec.n_look_ahead, trace.horizon_mae(model.spec.n_look_ahead))
    return [_write_csv(cfg.out_dir / "rolling.csv", cfg, trace.to_csv())]


def comparison_plan(cfg: RunConfig, frame: TimeSeriesFrame):
    plan = [row for row in COMPARISON_PLAN if not row[1]]
    if cfg.compare.get("with_events", True) and _has_events(frame):
        plan += [row for row in COMPARISON_PLAN if row[1]]
    return plan


def cmd_compare(cfg: RunConfig, args) -> list[Path]:
    frame = load_frame(cfg)
    threads = _threads()
    table, runs = run_comparison(
        frame, cfg.split, lambda k, e: cfg.train_config(k, e), comparison_plan(cfg, frame),
        threads=threads, windows=lambda k, e: cfg.window(k, e, row=True))
    out = cfg.out_dir
    models = out / "models"
    models.mkdir(exist_ok=True)
    written = []
    for run in runs:
        name = run.kind.value + ("+events" if run.with_events else "")
        path = models / f"{name}.json"
        checkpoint_save(run.model, path,
                        extra={"config_hash": cfg.config_hash, "config": cfg.content_dict()})
        written.append(path)
    text = table.render()
    print(text, end="")
    return [_write_json(out / "comparison.json", cfg, table.to_dict()),
            _write_csv(out / "comparison.txt", cfg, text)] + written


def cmd_explain(cfg: RunConfig, args) -> list[Path]:
    model = _load_model(cfg)
    if not isinstance(model, TemporalFusionTransformer):
        raise UsageError(f"explain needs a TFT checkpoint, got {model.kind.value}")
    ds = _test_windows(model, load_frame(cfg), cfg.split)
    importance = variable_importance(model, ds)
    profile = attention_by_lag(model, ds)
    out = cfg.out_dir
    return [_write_json(out / "explain.json", cfg, {"importance": importance.to_dict(),
                                                    "attention": profile.to_dict()}),
            _write_csv(out / "attention.csv", cfg, profile.to_csv())]


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "forecast": cmd_forecast,
    "rolling": cmd_rolling,
    "compare": cmd_compare,
    "explain": cmd_explain,
}


def _threads() -> int:
    raw = os.environ.get("TEMPOFUSE_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"TEMPOFUSE_THREADS must be an integer, got {raw!r}") from None
    return max(1, value)


# -- argument parsing -------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage().strip()}\n{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration document")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration entry (repeatable, dotted keys)")
    common.add_argument("--seed", type=int, help="seed for data synthesis and training")
    common.add_argument("--output", help="output directory")
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = _Parser(prog="tempofuse", description="Multi-horizon departure demand forecasting.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    helps = {
        "synth": "write a synthetic demand file, event file and profile",
        "train": "fit one model and write its checkpoint and training report",
        "evaluate": "score a checkpoint on the test range",
        "forecast": "forecast every horizon from one issue time",
        "rolling": "re-issue forecasts every quarter hour over a range",
        "compare": "train every model and write the comparison table",
        "explain": "variable importance and attention profile of a TFT checkpoint",
    }
    cmds = {name: sub.add_parser(name, parents=[common], help=text)
            for name, text in helps.items()}
    cmds["train"].add_argument("--model", choices=[k.value for k in ForecasterKind])
    for name in ("evaluate", "forecast", "rolling", "explain"):
        cmds[name].add_argument("--checkpoint", help="checkpoint path (default OUTPUT/model.json)")
    cmds["forecast"].add_argument("--issue-time", dest="issue_time")
    cmds["rolling"].add_argument("--start", dest="rolling_start")
    cmds["rolling"].add_argument("--end", dest="rolling_end")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(f"{parser.format_usage().strip()}\ntempofuse: error: "
                             f"a command is required")
        logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
        direct = {k: getattr(args, k, None) for k in
                  ("seed", "output", "model", "checkpoint", "issue_time", "rolling_start",
                   "rolling_end")}
        cfg = load_config(args.config, args.set, **direct)
        for path in COMMANDS[args.command](cfg, args):
            print(f"wrote {path}")
        return EXIT_OK
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"tempofuse: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, CheckpointError, OSError) as exc:
        print(f"tempofuse: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TempofuseError as exc:
        print(f"tempofuse: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

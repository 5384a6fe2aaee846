"""Versioned JSON checkpoints for every forecaster kind."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from tempofuse.data.scaling import ScalerParams
from tempofuse.data.windows import WindowSpec
from tempofuse.errors import CheckpointError
from tempofuse.layers import CALENDAR_VOCAB
from tempofuse.models.base import Forecaster, ForecasterKind

FORMAT = "tempofuse-checkpoint"
VERSION = 1


def checkpoint_dict(model: Forecaster, extra: dict | None = None) -> dict:
    from tempofuse.models import model_options
    weights = {}
    for name, value in model.state().items():
        arr = np.asarray(value, dtype=np.float64)
        weights[name] = {"shape": list(arr.shape), "values": arr.ravel().tolist()}
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "kind": model.kind.value,
        "window": {"n_lag": model.spec.n_lag, "n_look_ahead": model.spec.n_look_ahead},
        "observed_names": list(model.observed_names),
        "scaler": None if model.scaler is None else model.scaler.to_dict(),
        "quantile_levels": list(model.quantile_levels),
        "calendar_vocab": dict(CALENDAR_VOCAB),
        "options": model_options(model),
        "weights": weights,
    }
    if extra:
        doc["extra"] = extra
    return doc


def checkpoint_save(model: Forecaster, path, extra: dict | None = None) -> None:
    Path(path).write_text(json.dumps(checkpoint_dict(model, extra)))


def model_from_dict(doc: dict) -> Forecaster:
    from tempofuse.models import create_model
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise CheckpointError("not a tempofuse checkpoint")
    if doc.get("version") != VERSION:
        raise CheckpointError(f"checkpoint version {doc.get('version')} is not supported "
                              f"(expected {VERSION})")
    try:
        spec = WindowSpec(**doc["window"])
        model = create_model(ForecasterKind(doc["kind"]), spec, tuple(doc["observed_names"]),
                             **doc["options"])
        state = {name: np.asarray(w["values"], dtype=np.float64).reshape(w["shape"])
                 for name, w in doc["weights"].items()}
        model.load_state(state)
        model.scaler = None if doc["scaler"] is None else ScalerParams.from_dict(doc["scaler"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from None
    if list(model.quantile_levels) != list(doc["quantile_levels"]):
        raise CheckpointError("checkpoint quantile levels disagree with the stored config")
    return model


def checkpoint_load(path) -> Forecaster:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: truncated or corrupted checkpoint "
                              f"(line {exc.lineno}, column {exc.colno}: {exc.msg})") from None
    return model_from_dict(doc)

"""Experiment configuration: presets, JSON loading, dotted overrides, validation."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .errors import ConfigurationError
from .gan_engine import GRAD_METHODS, MODELS

FULL_PRESET = {
    "data": {"ports": None, "n": 1000, "seed": 0, "threshold_nm": 100.0},
    "model": {"name": "qugan36", "embed_axis": "ry", "grad_method": "adjoint", "classical_output_bias": 2.0},
    "train": {"epochs": 1000, "batch_size": 32, "lr_disc": 0.3, "lr_gen": 0.001, "seeds": [0, 1, 2, 3, 4]},
    "eval": {"eval_samples": 1000, "eval_every": 1, "histogram_bins": 50},
    "baseline": {"n": 1000, "seed": 0, "renormalize": True},
}

DESK_PRESET = copy.deepcopy(FULL_PRESET)
DESK_PRESET["train"].update(epochs=200, seeds=[0, 1, 2])
DESK_PRESET["eval"].update(eval_every=10)

PRESETS = {"full": FULL_PRESET, "desk": DESK_PRESET}

# key -> accepted python types
_SCHEMA = {
    "data": {"ports": (str, type(None)), "n": int, "seed": int, "threshold_nm": (int, float)},
    "model": {"name": str, "embed_axis": str, "grad_method": str, "classical_output_bias": (int, float)},
    "train": {"epochs": int, "batch_size": int, "lr_disc": (int, float), "lr_gen": (int, float), "seeds": list},
    "eval": {"eval_samples": int, "eval_every": int, "histogram_bins": int},
    "baseline": {"n": int, "seed": int, "renormalize": bool},
}


def load_config(path=None, preset: str = "full") -> dict:
    """Preset values, overlaid by the sections present in the JSON file at ``path``."""
    if preset not in PRESETS:
        raise ConfigurationError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    config = copy.deepcopy(PRESETS[preset])
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigurationError(f"{path}: top level must be an object")
        for section, values in user.items():
            if section not in _SCHEMA:
                raise ConfigurationError(f"{path}: unknown section {section!r}")
            if not isinstance(values, dict):
                raise ConfigurationError(f"{path}: section {section!r} must be an object")
            config[section].update(values)
    return config


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings; values are parsed as JSON when possible."""
    config = copy.deepcopy(config)
    for item in overrides or ():
        key, sep, value = item.partition("=")
        section, dot, name = key.partition(".")
        if not sep or not dot:
            raise ConfigurationError(f"override {item!r} must look like section.key=value")
        if section not in _SCHEMA or name not in _SCHEMA[section]:
            raise ConfigurationError(f"unknown config key {key!r}")
        config[section][name] = _parse_value(value)
    return config


def validate_config(config: dict) -> dict:
    for section, fields in _SCHEMA.items():
        values = config.get(section)
        if not isinstance(values, dict):
            raise ConfigurationError(f"missing section {section!r}")
        for name in values:
            if name not in fields:
                raise ConfigurationError(f"unknown config key {section}.{name}")
        for name, types in fields.items():
            if name not in values:
                raise ConfigurationError(f"missing config key {section}.{name}")
            value = values[name]
            if isinstance(value, bool) and types is not bool:
                raise ConfigurationError(f"{section}.{name} must not be a boolean")
            if not isinstance(value, types):
                raise ConfigurationError(f"{section}.{name} has invalid type {type(value).__name__}")

    data, model, train, ev, base = (config[s] for s in ("data", "model", "train", "eval", "baseline"))
    if data["n"] < 1:
        raise ConfigurationError("data.n must be >= 1")
    if data["threshold_nm"] < 0:
        raise ConfigurationError("data.threshold_nm must be >= 0")
    if model["name"] not in MODELS:
        raise ConfigurationError(f"unknown model {model['name']!r}; valid names: {', '.join(MODELS)}")
    if model["embed_axis"] not in ("rx", "ry"):
        raise ConfigurationError("model.embed_axis must be 'rx' or 'ry'")
    if model["grad_method"] not in GRAD_METHODS:
        raise ConfigurationError(f"model.grad_method must be one of {GRAD_METHODS}")
    if train["epochs"] < 0:
        raise ConfigurationError("train.epochs must be >= 0")
    if train["batch_size"] < 1:
        raise ConfigurationError("train.batch_size must be >= 1")
    if train["lr_disc"] <= 0 or train["lr_gen"] <= 0:
        raise ConfigurationError("learning rates must be > 0")
    seeds = train["seeds"]
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigurationError("train.seeds must be a non-empty list of integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigurationError("train.seeds contains duplicates")
    if ev["eval_samples"] < 1 or ev["eval_every"] < 1:
        raise ConfigurationError("eval.eval_samples and eval.eval_every must be >= 1")
    if ev["histogram_bins"] < 2:
        raise ConfigurationError("eval.histogram_bins must be >= 2")
    if base["n"] < 1:
        raise ConfigurationError("baseline.n must be >= 1")
    return config


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]

"""Run configuration: defaults, file/flag merging, and content hashing.

A run is fully described by one nested dict. Precedence is flags > config
file > defaults. Every artifact embeds the hash of the full effective
config; each pipeline stage additionally records the hash of the config
sections it depends on, so downstream commands can detect stale inputs
without invalidating runs that only changed downstream settings.
"""

from __future__ import annotations

import copy
import hashlib
import json

from .errors import ConfigError

DEFAULTS: dict = {
    "problem": {"name": "burgers", "kappa": 1.0, "source_mode": "auto"},
    "grid": {"n": 257, "kind": "chebyshev"},
    "snapshots": {"n_train": 100, "n_test": 100, "seed_train": 101, "seed_test": 202},
    "pod": {"ell": 20},
    "model": {"r": 8},
    "offline": {
        "epochs": 15000,
        "lr": 1e-3,
        "lr_decay": 0.5,
        "lr_decay_every": 2000,
        "lambda0": 1.0,
        "lambda1": 1e-3,
        "seed": 303,
    },
    "online": {
        "m1": 128,
        "m2": 2,
        "lambda_bc": 10.0,
        "gamma0": 1e-2,
        "rho": 0.99,
        "stop_tol": 1e-4,
        "max_epochs": 50000,
        "lr": 1e-3,
        "seed": 404,
        "workers": 4,
        "loss_history_points": 2000,
    },
    "baseline": {
        "epochs": 15000,
        "lr": 1e-3,
        "lr_decay": 0.5,
        "lr_decay_every": 2000,
        "seed": 505,
    },
    "eval": {"rel_error_mode": "l2", "hist_bins": 24},
    "backend": "auto",
    "record_timing": True,
    "paths": {"workdir": "runs/default"},
}

#: config sections each stage's outputs depend on (staleness detection)
STAGE_SECTIONS = {
    "snapshots": ("problem", "grid", "snapshots"),
    "pod": ("problem", "grid", "snapshots", "pod"),
    "train": ("problem", "grid", "snapshots", "pod", "model", "offline"),
    "adapt": ("problem", "grid", "snapshots", "pod", "model", "offline", "online"),
    "baseline": ("problem", "grid", "snapshots", "pod", "model", "baseline"),
    "eval": ("problem", "grid", "snapshots", "pod", "model"),
}


def _deep_merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {here!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {here!r} must be a section, got {val!r}")
            out[key] = _deep_merge(base[key], val, here)
        else:
            out[key] = val
    return out


def _parse_override_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, assignments: list[str]) -> dict:
    """Apply dotted key=value overrides (values parsed as JSON, else string)."""
    out = copy.deepcopy(cfg)
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        dotted, _, raw = item.partition("=")
        keys = dotted.strip().split(".")
        node = out
        for k in keys[:-1]:
            if k not in node or not isinstance(node[k], dict):
                raise ConfigError(f"unknown config section {dotted!r}")
            node = node[k]
        if keys[-1] not in node:
            raise ConfigError(f"unknown config key {dotted!r}")
        node[keys[-1]] = _parse_override_value(raw.strip())
    return out


def load_config(
    path: str | None = None,
    overrides: list[str] | None = None,
    workdir: str | None = None,
    backend: str | None = None,
) -> dict:
    """Merge defaults <- file <- dotted overrides <- dedicated flags."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                file_cfg = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"config file {path} must contain a JSON object")
        cfg = _deep_merge(cfg, file_cfg)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    if workdir is not None:
        cfg["paths"]["workdir"] = workdir
    if backend is not None:
        cfg["backend"] = backend
    return cfg


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    """Short content hash of the effective config.

    The paths section is excluded: where a run lives must not change what
    its artifacts contain.
    """
    subset = {k: v for k, v in cfg.items() if k != "paths"}
    return hashlib.sha256(canonical_json(subset).encode()).hexdigest()[:16]


def stage_hash(cfg: dict, stage: str) -> str:
    """Hash of just the sections a stage depends on."""
    if stage not in STAGE_SECTIONS:
        raise ConfigError(f"unknown stage {stage!r}")
    subset = {k: cfg[k] for k in STAGE_SECTIONS[stage]}
    return hashlib.sha256(canonical_json(subset).encode()).hexdigest()[:16]

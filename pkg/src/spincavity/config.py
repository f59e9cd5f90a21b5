"""Run configuration: JSON schema with a closed key vocabulary."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .engine import PropagationSettings
from .model import LambdaParams, ModelError, SimParams
from .presets import preset

TOP_KEYS = {
    "N", "eta", "delta", "Omega", "phi", "n_max", "n_bar", "eta_j",
    "k", "source", "fidelity_mode", "n_time_samples", "seed",
    "settings", "lambda_params", "sweep",
}
LAMBDA_KEYS = {"G", "Omega_L", "Delta", "delta", "omega_c", "omega_10", "gamma0", "q_factor"}
SETTINGS_KEYS = {"rel_tol", "abs_tol", "max_step"}
SWEEP_KEYS = {"axes"}
AXIS_KEYS = {"name", "values", "start", "stop", "steps"}
SWEEP_AXIS_NAMES = {"eta", "delta", "Omega", "n_bar", "N", "n_max", "k"}
SOURCES = {"full", "effective"}


class ConfigError(ValueError):
    """Raised for malformed or out-of-vocabulary configurations."""


@dataclass(frozen=True)
class SweepAxis:
    name: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration (defaults materialized)."""

    raw: dict

    @property
    def source(self) -> str:
        return self.raw["source"]

    @property
    def k(self) -> int:
        return int(self.raw["k"])

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def n_time_samples(self) -> int:
        return int(self.raw["n_time_samples"])

    @property
    def fidelity_mode(self) -> str:
        return self.raw["fidelity_mode"]

    def sweep_axes(self) -> list[SweepAxis]:
        sweep = self.raw.get("sweep")
        if not sweep:
            return []
        axes = []
        for ax in sweep["axes"]:
            if "values" in ax:
                values = tuple(float(v) for v in ax["values"])
            else:
                values = tuple(
                    float(v)
                    for v in _linspace(float(ax["start"]), float(ax["stop"]), int(ax["steps"]))
                )
            axes.append(SweepAxis(str(ax["name"]), values))
        return axes

    def sim_params(self, **overrides) -> SimParams:
        r = dict(self.raw)
        r.update(overrides)
        lp = None
        if r.get("lambda_params"):
            d = r["lambda_params"]
            lp = LambdaParams.from_detunings(
                G=float(d["G"]),
                Omega_L=float(d["Omega_L"]),
                Delta=float(d["Delta"]),
                delta=float(d.get("delta", r["delta"])),
                omega_c=float(d["omega_c"]),
                omega_10=float(d["omega_10"]),
                gamma0=float(d["gamma0"]) if d.get("gamma0") is not None else None,
                q_factor=float(d["q_factor"]) if d.get("q_factor") is not None else None,
            )
        return SimParams(
            N=int(r["N"]),
            eta=float(r["eta"]),
            delta=float(r["delta"]),
            Omega=float(r["Omega"]),
            phi=float(r["phi"]),
            n_max=int(r["n_max"]),
            n_bar=float(r["n_bar"]),
            eta_j=tuple(float(x) for x in r["eta_j"]) if r.get("eta_j") else None,
            lambda_params=lp,
        )

    def settings(self) -> PropagationSettings:
        s = self.raw.get("settings") or {}
        return PropagationSettings(
            rel_tol=float(s.get("rel_tol", 1e-9)),
            abs_tol=float(s.get("abs_tol", 1e-12)),
            max_step=float(s["max_step"]) if s.get("max_step") is not None else None,
        )


def _linspace(start: float, stop: float, steps: int) -> list[float]:
    if steps < 1:
        raise ConfigError("sweep axis needs steps >= 1")
    if steps == 1:
        return [start]
    return [start + (stop - start) * i / (steps - 1) for i in range(steps)]


def _check_keys(d: dict, allowed: set[str], where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}; "
                          f"allowed: {sorted(allowed)}")


DEFAULTS = {
    "Omega": 0.0,
    "phi": 0.0,
    "n_max": 12,
    "n_bar": 0.0,
    "eta_j": None,
    "k": 1,
    "source": "effective",
    "fidelity_mode": "trace",
    "n_time_samples": 201,
    "seed": 0,
    "settings": None,
    "lambda_params": None,
    "sweep": None,
}


def resolve_config(data: dict | None = None, preset_name: str | None = None) -> RunConfig:
    """Merge preset and explicit config into a fully resolved RunConfig.

    Explicit keys override preset keys; all keys are vocabulary checked;
    required physical fields must be present after the merge.
    """
    merged: dict = {}
    if preset_name is not None:
        merged.update(preset(preset_name))
    if data is not None:
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        _check_keys(data, TOP_KEYS, "config")
        for key, value in data.items():
            if key == "lambda_params" and isinstance(value, dict) and \
                    isinstance(merged.get("lambda_params"), dict):
                _check_keys(value, LAMBDA_KEYS, "lambda_params")
                merged["lambda_params"].update(value)
            else:
                merged[key] = value

    for key, default in DEFAULTS.items():
        merged.setdefault(key, default)

    missing = [k for k in ("N", "eta", "delta") if k not in merged]
    if missing:
        raise ConfigError(f"missing required config field(s): {missing}")

    if merged.get("lambda_params") is not None:
        _check_keys(merged["lambda_params"], LAMBDA_KEYS, "lambda_params")
    if merged.get("settings") is not None:
        _check_keys(merged["settings"], SETTINGS_KEYS, "settings")
    if merged.get("sweep") is not None:
        _check_keys(merged["sweep"], SWEEP_KEYS, "sweep")
        axes = merged["sweep"].get("axes")
        if not isinstance(axes, list) or not axes:
            raise ConfigError("sweep.axes must be a non-empty list")
        if len(axes) > 2:
            raise ConfigError("at most 2 sweep axes are supported")
        for ax in axes:
            _check_keys(ax, AXIS_KEYS, "sweep axis")
            if ax.get("name") not in SWEEP_AXIS_NAMES:
                raise ConfigError(
                    f"sweep axis name '{ax.get('name')}' not in {sorted(SWEEP_AXIS_NAMES)}"
                )
            has_values = "values" in ax
            has_range = all(k in ax for k in ("start", "stop", "steps"))
            if not (has_values or has_range):
                raise ConfigError("sweep axis needs 'values' or start/stop/steps")
            if has_values and (not isinstance(ax["values"], list) or not ax["values"]):
                raise ConfigError("sweep axis 'values' must be a non-empty list")
            if has_values and not all(
                isinstance(v, (int, float)) and abs(v) < 1e30 for v in ax["values"]
            ):
                raise ConfigError("sweep axis values must be finite numbers")

    if merged["source"] not in SOURCES:
        raise ConfigError(f"source must be one of {sorted(SOURCES)}")
    if merged["fidelity_mode"] not in ("trace", "project"):
        raise ConfigError("fidelity_mode must be 'trace' or 'project'")

    cfg = RunConfig(raw=merged)
    try:
        cfg.sim_params()  # surfaces physics-validation problems early
    except (ModelError, KeyError) as exc:
        raise PhysicsValidationError(str(exc)) from exc
    return cfg


class PhysicsValidationError(ValueError):
    """Raised when a syntactically valid config fails physical validation."""


def load_config_file(path: str | Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

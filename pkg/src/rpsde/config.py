"""Experiment configuration: JSON in, validated objects out.

The config is a single JSON object with nested sections.  Validation is
strict and total: unknown keys anywhere are rejected, and every problem is
collected before raising, so one run reports the full list.  A validated
config serializes back to canonical JSON byte-identically (sorted keys),
which is what run manifests hash.
"""

import hashlib
import json

import numpy as np

from .errors import ConfigError
from .models import (
    CubicScalarSpec,
    LinearPeriodicSpec,
    build_cubic_scalar,
    build_linear_periodic,
    build_polynomial_scalar,
)
from .noise import GridSpec
from .trig import TrigPoly

_TRIG_KEYS = {"constant", "sin", "cos", "base_frequency"}

_MODEL_KEYS = {
    "linear": {"kind", "alpha", "noise_scale", "period"},
    "cubic": {"kind", "gamma", "delta"},
    "poly1d": {"kind", "drift", "diffusion", "period"},
}

_COMMAND_KEYS = {
    "simulate": {"t0", "t1", "x0", "scheme"},
    "pullback": {"t_star", "x0", "tol", "n_cap", "n_max", "scheme"},
    "verify_rps": {"t_star", "x0", "tol", "n_cap", "scheme"},
    "check": {"box_radius", "n_pairs", "n_times", "p"},
    "contract": {"t0", "horizon_periods", "x0", "y0", "scheme"},
    "measure": {"s", "n", "x0", "tol", "n_cap", "modes", "coverage"},
    "kb": {"s", "x", "t", "interval", "n_periods", "n_mc", "tol"},
    "ergodic": {"s", "x", "h", "n_periods", "measure_n", "tol", "path_seed"},
    "mixing": {"s", "x", "y", "h", "interval", "n_list", "n", "p", "measure_n", "tol"},
    "bel": {"s", "x", "v", "h", "horizon", "n"},
}

_TOP_KEYS = {"model", "grid", "seed", "workers"} | set(_COMMAND_KEYS)


def _check_keys(section: dict, allowed: set, where: str, problems: list):
    for key in section:
        if key not in allowed:
            problems.append(f"{where}: unknown key {key!r} (allowed: {sorted(allowed)})")


def _trig_from(obj, where, problems) -> TrigPoly:
    if isinstance(obj, (int, float)):
        return TrigPoly(float(obj))
    if not isinstance(obj, dict):
        problems.append(f"{where}: expected number or trig-poly object")
        return TrigPoly(0.0)
    _check_keys(obj, _TRIG_KEYS, where, problems)
    try:
        return TrigPoly.from_dict(obj)
    except Exception as exc:  # reported, not raised, to keep collecting
        problems.append(f"{where}: {exc}")
        return TrigPoly(0.0)


def _model_from(section, problems):
    if not isinstance(section, dict) or "kind" not in section:
        problems.append("model: must be an object with a 'kind'")
        return None
    kind = section["kind"]
    if kind not in _MODEL_KEYS:
        problems.append(f"model.kind: unknown kind {kind!r} (choose from {sorted(_MODEL_KEYS)})")
        return None
    _check_keys(section, _MODEL_KEYS[kind], "model", problems)
    try:
        if kind == "cubic":
            return build_cubic_scalar(
                CubicScalarSpec(
                    gamma=float(section.get("gamma", 0.0)),
                    delta=float(section.get("delta", 0.0)),
                )
            )
        if kind == "linear":
            alpha = _trig_from(section.get("alpha", 1.0), "model.alpha", problems)
            period = section.get("period")
            return build_linear_periodic(
                LinearPeriodicSpec(
                    alpha=alpha,
                    noise_scale=float(section.get("noise_scale", 1.0)),
                    period=None if period is None else float(period),
                )
            )
        drift = {
            int(deg): _trig_from(val, f"model.drift[{deg}]", problems)
            for deg, val in section.get("drift", {}).items()
        }
        diffusion = {
            int(deg): _trig_from(val, f"model.diffusion[{deg}]", problems)
            for deg, val in section.get("diffusion", {}).items()
        }
        return build_polynomial_scalar(drift, diffusion, float(section["period"]))
    except ConfigError:
        raise
    except KeyError as exc:
        problems.append(f"model: missing required key {exc}")
    except Exception as exc:
        problems.append(f"model: {exc}")
    return None


def _grid_from(section, model, dt_override, problems):
    if not isinstance(section, dict):
        problems.append("grid: must be an object")
        return None
    _check_keys(section, {"dt", "steps_per_period"}, "grid", problems)
    if ("dt" in section) == ("steps_per_period" in section):
        problems.append("grid: give exactly one of dt / steps_per_period")
        return None
    if model is None:
        return None
    try:
        if dt_override is not None:
            return model.grid_for(float(dt_override))
        if "dt" in section:
            return model.grid_for(float(section["dt"]))
        n = int(section["steps_per_period"])
        return GridSpec(dt=model.period / n, steps_per_period=n)
    except Exception as exc:
        problems.append(f"grid: {exc}")
        return None


class Experiment:
    """Validated configuration bundle: model, grid, seed, command sections."""

    def __init__(self, raw: dict, model, grid, seed: int, workers: int):
        self.raw = raw
        self.model = model
        self.grid = grid
        self.seed = seed
        self.workers = workers

    def section(self, command: str) -> dict:
        key = command.replace("-", "_")
        return dict(self.raw.get(key, {}))

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, indent=2) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def load_config(path, seed_override=None, workers_override=None, dt_override=None) -> Experiment:
    """Parse + validate a config file; raises ConfigError listing every problem."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"not valid JSON: {exc}"])
    return validate_config(raw, seed_override, workers_override, dt_override)


def validate_config(raw, seed_override=None, workers_override=None, dt_override=None) -> Experiment:
    problems: list = []
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a JSON object"])
    _check_keys(raw, _TOP_KEYS, "top level", problems)
    if "model" not in raw:
        problems.append("top level: missing required section 'model'")
    if "grid" not in raw:
        problems.append("top level: missing required section 'grid'")
    model = _model_from(raw.get("model", {}), problems) if "model" in raw else None
    grid = _grid_from(raw.get("grid", {}), model, dt_override, problems) if "grid" in raw else None

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        problems.append("seed: must be an integer")
        seed = 0
    if seed_override is not None:
        seed = int(seed_override)
    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        problems.append("workers: must be a positive integer")
        workers = 1
    if workers_override is not None:
        workers = int(workers_override)

    for cmd, allowed in _COMMAND_KEYS.items():
        if cmd in raw:
            if not isinstance(raw[cmd], dict):
                problems.append(f"{cmd}: must be an object")
            else:
                _check_keys(raw[cmd], allowed, cmd, problems)

    if problems:
        raise ConfigError(problems)
    if seed_override is not None or workers_override is not None:
        raw = dict(raw)
        raw["seed"] = seed
        raw["workers"] = workers
    return Experiment(raw, model, grid, seed, workers)


_H_REGISTRY = {
    "identity": lambda xs: np.asarray(xs)[..., 0],
    "square": lambda xs: np.asarray(xs)[..., 0] ** 2,
    "clamp1": lambda xs: np.clip(np.asarray(xs)[..., 0], -1.0, 1.0),
    "tanh": lambda xs: np.tanh(np.asarray(xs)[..., 0]),
    "ones": lambda xs: np.ones(np.asarray(xs).shape[:-1]),
}


def observable(name: str):
    """Named bounded/simple observables usable from config files."""
    if name not in _H_REGISTRY:
        raise ConfigError([f"h: unknown observable {name!r} (choose from {sorted(_H_REGISTRY)})"])
    return _H_REGISTRY[name]

"""Run configuration: JSON schema, defaults, validation and object building.

A config file is a JSON object with blocks ``coefficients``, ``reaction``,
``numerics``, ``analysis``, ``simulate`` and ``output``; every omitted field
is filled with its default and the fully resolved config is echoed into the
result manifest. The manifest itself (resolved config plus a ``_meta``
block) is a valid config, so a run can be reproduced from its manifest
alone.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import jsonschema
import numpy as np

from . import speed
from .coefficients import (expression_reaction, logistic_reaction, make_builtin,
                           make_field)
from .parabolic import CellGrid, default_cell_grid

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "_meta": {"type": "object"},
        "coefficients": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"type": ["string", "null"]},
                "params": {"type": "object"},
                "a": {"type": "string"},
                "q": {"type": "string"},
                "mu": {"type": "string"},
                "period_l": {"type": "number", "exclusiveMinimum": 0},
                "time_period": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "bounds_resolution": {"type": "integer", "minimum": 16},
                "bounds_window": {
                    "type": "array", "items": {"type": "number"},
                    "minItems": 2, "maxItems": 2,
                },
            },
        },
        "reaction": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["logistic", "expression"]},
                "f": {"type": "string"},
                "C": {"type": ["number", "null"]},
                "nu": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "delta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "numerics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_x": {"type": "integer", "minimum": 32},
                "steps_per_unit": {"type": ["integer", "null"], "minimum": 1},
                "horizon": {"type": "integer", "minimum": 50},
                "burn_in": {"type": "integer", "minimum": 10},
                "T_max": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambda": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "lambda_grid": {
                    "type": ["array", "null"],
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 2,
                },
                "n_lambda": {"type": "integer", "minimum": 4},
                "lambda_span": {
                    "type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 2, "maxItems": 2,
                },
                "k0": {"type": "number", "exclusiveMinimum": 0},
                "delta_tol": {"type": "number", "exclusiveMinimum": 0},
                "refine_tol": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "init": {"enum": ["step", "exponential", "zero"]},
                "lambda0": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "T_sim": {"type": "number", "exclusiveMinimum": 0},
                "theta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "sample_dt": {"type": "number", "exclusiveMinimum": 0},
                "dx": {"type": "number", "exclusiveMinimum": 0},
                "x0": {"type": "number"},
                "c_max": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "store_profiles": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json"]}},
                "profile_snapshots": {"type": "boolean"},
            },
        },
    },
}

DEFAULTS = {
    "coefficients": {
        "family": "homogeneous",
        "params": {"mu0": 1.0},
        "a": "1",
        "q": "0",
        "mu": "1",
        "period_l": 1.0,
        "time_period": None,
        "bounds_resolution": 64,
        "bounds_window": [0.0, 100.0],
    },
    "reaction": {"kind": "logistic", "f": "", "C": None, "nu": 1.0, "delta": 1.0},
    "numerics": {"n_x": 128, "steps_per_unit": None, "horizon": 200,
                 "burn_in": 20, "T_max": None},
    "analysis": {"lambda": None, "lambda_grid": None, "n_lambda": 24,
                 "lambda_span": [0.1, 10.0], "k0": 0.05, "delta_tol": 1e-3,
                 "refine_tol": None},
    "simulate": {"init": "step", "lambda0": None, "T_sim": 120.0, "theta": 0.5,
                 "sample_dt": 0.25, "dx": 0.1, "x0": 0.0, "c_max": None,
                 "store_profiles": True},
    "output": {"directory": "out", "formats": ["csv", "json"],
               "profile_snapshots": False},
}


class ConfigError(ValueError):
    pass


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "params":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve(raw: dict) -> dict:
    """Validate a raw config dict and fill every omitted field."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for e in errors[:8]:
            path = "$." + ".".join(str(p) for p in e.absolute_path) if e.absolute_path else "$"
            msgs.append(f"{path}: {e.message}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(msgs))
    resolved = _merge(DEFAULTS, raw)
    resolved.pop("_meta", None)
    return resolved


def load(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from None
    return resolve(raw)


@dataclass
class Run:
    """Resolved config plus lazily built model objects."""
    cfg: dict

    def __post_init__(self):
        self._cf = None
        self._rt = None

    def coefficients(self):
        if self._cf is None:
            block = self.cfg["coefficients"]
            if block.get("family"):
                self._cf, self._rt = make_builtin(block["family"], block["params"])
            else:
                self._cf = make_field(
                    a_src=block["a"], q_src=block["q"], mu_src=block["mu"],
                    period_l=block["period_l"], time_period=block["time_period"],
                    resolution=block["bounds_resolution"],
                    t_window=tuple(block["bounds_window"]))
                self._rt = None
            rblock = self.cfg["reaction"]
            if rblock["kind"] == "expression":
                self._rt = expression_reaction(self._cf, rblock["f"], rblock["C"],
                                               rblock["nu"], rblock["delta"])
            elif self._rt is None:
                self._rt = logistic_reaction(self._cf)
        return self._cf, self._rt

    def cell_grid(self) -> CellGrid:
        cf, _ = self.coefficients()
        num = self.cfg["numerics"]
        return default_cell_grid(cf, num["n_x"], num["steps_per_unit"])

    def lambda_grid(self):
        cf, _ = self.coefficients()
        ana = self.cfg["analysis"]
        if ana["lambda_grid"] is not None:
            grid = np.asarray(ana["lambda_grid"], dtype=float)
            lam_hat = float(np.sqrt(max(speed.least_mean_of_mu_min(cf), 1e-12)
                                    / cf.alpha_lower))
            return grid, lam_hat
        return speed.default_lambda_grid(cf, n=ana["n_lambda"],
                                         span=tuple(ana["lambda_span"]),
                                         horizon=self.cfg["numerics"]["horizon"])

    def refine_tol(self, lam_hat: float) -> float:
        tol = self.cfg["analysis"]["refine_tol"]
        return tol if tol is not None else 0.005 * lam_hat

"""Run configuration: a single JSON file, validated against a schema."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import jsonschema

from .boundary import FILLET_SPLITS
from .coefficients import FIELD_NAMES, PRESETS, CoefficientSet, preset
from .errors import ConfigError, GMKError
from .geometry import DELTA_MAX, EPS_MAX, SQRT2, DomainSpec

_monomials = {
    "type": "array",
    "items": {
        "type": "array",
        "prefixItems": [{"type": "integer", "minimum": 0}, {"type": "integer", "minimum": 0}, {"type": "number"}],
        "minItems": 3,
        "maxItems": 3,
    },
}
_field = {"oneOf": [{"type": "number"}, _monomials]}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "domain": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon_cap": {"type": "number", "exclusiveMinimum": 0, "maximum": EPS_MAX},
                "delta_corner": {"type": "number", "minimum": 0, "maximum": DELTA_MAX},
                "cap_halfwidth": {"type": "number", "exclusiveMinimum": 0, "maximum": SQRT2 / 2.0},
                "fillet_split": {"enum": list(FILLET_SPLITS)},
            },
        },
        "coefficients": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"preset": {"enum": sorted(PRESETS)}, **{name: _field for name in FIELD_NAMES}},
        },
        "mesh": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n_theta": {"type": "integer", "minimum": 16}, "n_r": {"type": "integer", "minimum": 4}},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambda": {"type": "number", "exclusiveMinimum": 0},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"oneOf": [{"type": "integer", "minimum": 1}, {"type": "null"}]},
            },
        },
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "boundary_samples": {"type": "integer", "minimum": 16},
                "interior_samples": {"type": "integer", "minimum": 1},
            },
        },
        "convergence": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"levels": {"type": "integer", "minimum": 3}, "n_theta0": {"type": "integer", "minimum": 16}},
        },
        "seed": {"type": "integer"},
    },
}

DEFAULTS = {
    "domain": {"epsilon_cap": 0.05, "delta_corner": 0.05, "cap_halfwidth": SQRT2 / 2.0, "fillet_split": "outflow"},
    "coefficients": {"preset": "default"},
    "mesh": {"n_theta": 64, "n_r": 16},
    "solver": {"lambda": 10.0, "tol": 1e-12, "max_iter": None},
    "sampling": {"boundary_samples": 2048, "interior_samples": 4096},
    "convergence": {"levels": 3, "n_theta0": 32},
    "seed": 0,
}


@dataclass(frozen=True)
class RunConfig:
    raw: dict

    @property
    def domain(self) -> DomainSpec:
        d = self.raw["domain"]
        return DomainSpec(epsilon=d["epsilon_cap"], delta=d["delta_corner"], cap_halfwidth=d["cap_halfwidth"])

    @property
    def fillet_split(self) -> str:
        return self.raw["domain"]["fillet_split"]

    @property
    def coefficients(self) -> CoefficientSet:
        c = dict(self.raw["coefficients"])
        return preset(c.pop("preset"), **c)

    def __getitem__(self, key):
        return self.raw[key]


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_config(data: dict | None) -> RunConfig:
    """Validate a config mapping and fill in defaults.

    Raises
    ------
    ConfigError
        With the JSON path of the first offending entry.
    """
    data = {} if data is None else data
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {e.message}")
    cfg = RunConfig(_merge(DEFAULTS, data))
    try:
        cfg.domain
        cfg.coefficients
    except GMKError as exc:
        raise ConfigError(f"config error: {exc}") from exc
    return cfg


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(data)

"""JSON (de)serialization of system and run configurations.

Complex numbers are written as ``[re, im]`` pairs.  Documents are validated
against a JSON schema before any object is built, and unknown keys are
rejected.
"""
from __future__ import annotations

import hashlib
import json
import math

import jsonschema
import numpy as np

from .models import (
    DeltaSites,
    PiecewiseExp,
    RationalSpin,
    SutherlandHyp,
    SutherlandTrig,
    SystemConfig,
)

__all__ = [
    "SCHEMA_VERSION",
    "SYSTEM_SCHEMA",
    "RUN_SCHEMA",
    "ConfigFormatError",
    "system_from_dict",
    "system_to_dict",
    "load_run_config",
    "validate_run",
    "canonical_hash",
    "output_times",
]

SCHEMA_VERSION = 1


class ConfigFormatError(ValueError):
    pass


_complex = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_cvec = {"type": "array", "items": _complex, "minItems": 1}
_cmat = {"type": "array", "items": _cvec, "minItems": 1}
_cmats = {"type": "array", "items": _cmat, "minItems": 1}
_num = {"type": "number"}


def _variant(name, props, required):
    return {
        "type": "object",
        "properties": {"type": {"const": name}, **props},
        "required": ["type", *required],
        "additionalProperties": False,
    }


SYSTEM_SCHEMA = {
    "type": "object",
    "properties": {
        "variant": {
            "oneOf": [
                _variant("rational", {"S0": _cmat, "frozen": {"type": "boolean"}}, ["S0"]),
                _variant("trig", {"e": _num}, ["e"]),
                _variant("hyp", {"e": _num}, ["e"]),
                _variant("delta", {"sites": {"type": "array", "items": _num, "minItems": 1},
                                   "rho0": _cmats}, ["sites", "rho0"]),
                _variant("piecewise", {"breakpoints": {"type": "array", "items": _num, "minItems": 2},
                                       "s0": _cmats}, ["breakpoints", "s0"]),
            ]
        },
        "g": _num,
        "q0": _cvec,
        "p0": _cvec,
        "real": {"type": "boolean"},
    },
    "required": ["variant", "g", "q0", "p0"],
    "additionalProperties": False,
}

_integrator = {
    "type": "object",
    "properties": {
        "method": {"enum": ["RK4", "RK45", "DOP853"]},
        "step": {"type": "number", "exclusiveMinimum": 0},
        "rtol": {"type": "number", "exclusiveMinimum": 0},
        "atol": {"type": "number", "exclusiveMinimum": 0},
        "max_steps": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

RUN_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "system": SYSTEM_SCHEMA,
        "solver": {"enum": ["exact", "oracle", "both"]},
        "integrator": _integrator,
        "output": {
            "type": "object",
            "properties": {
                "times": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "t_max": {"type": "number", "exclusiveMinimum": 0},
                "dt_out": {"type": "number", "exclusiveMinimum": 0},
                "format": {"enum": ["csv", "jsonl"]},
                "path": {"type": "string", "minLength": 1},
            },
            "oneOf": [{"required": ["times"]}, {"required": ["t_max", "dt_out"]}],
            "additionalProperties": False,
        },
        "seed": {"type": "integer"},
    },
    "required": ["schema_version", "system", "output"],
    "additionalProperties": False,
}


def _c(v) -> complex:
    return complex(v[0], v[1])


def _carr(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def _pairs(a) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def system_from_dict(doc: dict, t_max: float = 1.0) -> SystemConfig:
    try:
        jsonschema.validate(doc, SYSTEM_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigFormatError(exc.message) from None
    v = doc["variant"]
    kind = v["type"]
    try:
        if kind == "rational":
            var = RationalSpin(_carr(v["S0"]), bool(v.get("frozen", False)))
        elif kind == "trig":
            var = SutherlandTrig(v["e"])
        elif kind == "hyp":
            var = SutherlandHyp(v["e"])
        elif kind == "delta":
            var = DeltaSites(tuple(v["sites"]), _carr(v["rho0"]))
        else:
            bps = [float(b) for b in v["breakpoints"]]
            # the ends are pinned to +-pi; accept them to double precision
            if abs(bps[0] + math.pi) < 1e-12:
                bps[0] = -math.pi
            if abs(bps[-1] - math.pi) < 1e-12:
                bps[-1] = math.pi
            var = PiecewiseExp(tuple(bps), _carr(v["s0"]))
        return SystemConfig(var, doc["g"], _carr(doc["q0"]), _carr(doc["p0"]), t_max,
                            bool(doc.get("real", False)))
    except ValueError as exc:
        raise ConfigFormatError(str(exc)) from None


def system_to_dict(cfg: SystemConfig) -> dict:
    v = cfg.variant
    if isinstance(v, RationalSpin):
        var = {"type": "rational", "S0": _pairs(v.S0)}
        if v.frozen:
            var["frozen"] = True
    elif isinstance(v, (SutherlandTrig, SutherlandHyp)):
        var = {"type": v.kind, "e": v.e}
    elif isinstance(v, DeltaSites):
        var = {"type": "delta", "sites": list(v.sites), "rho0": _pairs(v.rho0)}
    else:
        var = {"type": "piecewise", "breakpoints": list(v.breakpoints), "s0": _pairs(v.s0)}
    out = {"variant": var, "g": cfg.g, "q0": _pairs(cfg.q0), "p0": _pairs(cfg.p0)}
    if cfg.real:
        out["real"] = True
    return out


def validate_run(doc: dict) -> dict:
    try:
        jsonschema.validate(doc, RUN_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path)
        raise ConfigFormatError(f"{loc or '<root>'}: {exc.message}") from None
    return doc


def load_run_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigFormatError(f"cannot read {path}: {exc}") from None
    return validate_run(doc)


def output_times(out: dict) -> np.ndarray:
    if "times" in out:
        t = np.array(out["times"], dtype=float)
        if np.any(np.diff(t) < 0):
            raise ConfigFormatError("output times must be nondecreasing")
        return t
    n = int(math.floor(out["t_max"] / out["dt_out"] + 1e-9))
    t = out["dt_out"] * np.arange(n + 1)
    if t[-1] < out["t_max"] - 1e-12:
        t = np.append(t, out["t_max"])
    return t


def canonical_hash(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()

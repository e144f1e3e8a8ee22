"""JSON schemas for experiment configs, one per kind.

A config is ``{"kind": ..., "seed": ..., "out": ..., "params": {...}}``;
unknown fields are rejected at every level.
"""

from __future__ import annotations

import copy

NUM = {"type": "number"}
POS = {"type": "number", "exclusiveMinimum": 0}
INT_POS = {"type": "integer", "minimum": 1}

WEIGHT = {
    "type": "object",
    "properties": {"kind": {"enum": ["bracket", "one"]}, "kappa": {"type": "number", "minimum": 0}},
    "required": ["kind"],
    "additionalProperties": False,
}

COEFFICIENT = {
    "type": "object",
    "properties": {
        "name": {"enum": ["example", "log", "oscillating", "constant", "power"]},
        "kappa1": {"type": "number", "minimum": 0, "maximum": 1},
        "kappa2": {"type": "number", "minimum": 0, "maximum": 1},
        "omega": WEIGHT,
        "phi": WEIGHT,
        "scale": POS,
        "value": POS,
        "power": NUM,
        "T": POS,
    },
    "required": ["name"],
    "additionalProperties": False,
}

DATA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["zero", "bump", "gaussian", "mode"]},
        "center": NUM,
        "radius": POS,
        "width": POS,
        "xi0": NUM,
        "amplitude": NUM,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

GRID_M = {"type": "integer", "minimum": 8}


def _params(props, required):
    return {"type": "object", "properties": props, "required": required,
            "additionalProperties": False}


PARAMS = {
    "weights-axioms": _params(
        {"omega": WEIGHT, "phi": WEIGHT, "radius": POS, "n_pairs": INT_POS, "n_grid": INT_POS},
        ["omega", "phi"]),
    "symbol-fit": _params(
        {"coefficient": COEFFICIENT, "t_min": POS, "n_t": INT_POS, "x_radius": POS,
         "n_x": INT_POS, "refinements": INT_POS},
        ["coefficient"]),
    "excision-bounds": _params(
        {"coefficient": COEFFICIENT, "k": {"type": "number", "minimum": 1}, "N": POS,
         "t_min": POS, "n_t": INT_POS, "radius": POS, "n_xi": INT_POS,
         "ratio_mags": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
         "log_integral_eps": {"type": "array", "items": POS}},
        ["coefficient"]),
    "sobolev-selftest": _params(
        {"L": POS, "M": GRID_M, "xi0": NUM, "s1": {"type": "array", "items": NUM},
         "k": {"type": "number", "minimum": 1}, "n_random": INT_POS},
        []),
    "solve": _params(
        {"coefficient": COEFFICIENT, "L": POS, "M": GRID_M, "T": POS, "f1": DATA, "f2": DATA,
         "cfl": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
         "grading": {"type": "number", "minimum": 1}, "n_steps": INT_POS,
         "snapshots": {"type": "array", "items": {"type": "number", "minimum": 0}}},
        ["coefficient", "L", "M", "T", "f1"]),
    "cone": _params(
        {"coefficient": COEFFICIENT, "L": POS, "M": GRID_M, "x0": NUM, "t0": POS, "R0": POS,
         "gamma": {"oneOf": [POS, {"const": "auto"}]},
         "bound": {"enum": ["integrated", "short"]},
         "cfl": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
         "grading": {"type": "number", "minimum": 1}, "snapshots": INT_POS},
        ["coefficient", "L", "M", "t0"]),
    "activator-sweep": _params(
        {"gamma": POS, "T1": POS, "mu1": POS, "mu2": POS,
         "theta": {"enum": ["log(1/t)", "log(1+1/t)", "1"]}, "T": POS,
         "lambdas": {"type": "array", "items": POS, "minItems": 1}, "delta": POS,
         "rtol": {"type": "number", "minimum": 1e-12}, "plateau_only": {"type": "boolean"}},
        ["gamma", "T1", "mu1", "mu2", "theta", "lambdas", "delta"]),
    "cascade-scan": _params(
        {"speed": {"enum": ["constant", "oscillating", "activator"]}, "c": POS, "gamma": POS,
         "T1": POS, "T": POS, "lambdas": {"type": "array", "items": POS, "minItems": 2},
         "n_modes": INT_POS, "weights": {"enum": ["exp-sqrt", "one"]},
         "ms": {"type": "array", "items": NUM, "minItems": 1},
         "rtol": {"type": "number", "minimum": 1e-12}},
        ["speed"]),
}

KINDS = list(PARAMS)

DESCRIPTIONS = {
    "weights-axioms": "sampled check of the weight axioms for a pair (omega, Phi)",
    "symbol-fit": "singularity orders, log blow-up and ellipticity of a coefficient",
    "excision-bounds": "majorant constants and log-integral ratios of the excised symbol",
    "sobolev-selftest": "spectral Sobolev norm checks on Gaussian and random states",
    "solve": "leapfrog solve of the Cauchy problem with snapshot output",
    "cone": "outside-cone mass and support growth for compactly supported data",
    "activator-sweep": "activator speeds across lambda with loss-of-regularity trend",
    "cascade-scan": "truncated weighted mode-energy sums of the oscillator cascade",
}


def config_schema(kind):
    """Full config schema for one kind."""
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": f"hyperlab {kind} config",
        "type": "object",
        "properties": {
            "kind": {"const": kind},
            "seed": {"type": "integer", "minimum": 0},
            "out": {"type": "string"},
            "params": copy.deepcopy(PARAMS[kind]),
        },
        "required": ["kind", "params"],
        "additionalProperties": False,
    }


def catalog():
    return [{"kind": k, "description": DESCRIPTIONS[k], "schema": config_schema(k)} for k in KINDS]

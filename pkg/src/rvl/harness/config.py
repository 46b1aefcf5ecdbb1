"""
Experiment configuration: YAML files validated against a JSON schema.

A config names one experiment and its parameters:

    experiment: gauss-decay
    seed: 0
    out: results/gauss
    sieve: {limit: 100000}
    params: {qmax: 200}
    tolerance: {C_cap: 5.0}

Each experiment has its own parameter schema, so misspelled or
mistyped keys are reported by name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import yaml

from ..errors import ConfigError

BODY = {"enum": ["interval", "cube", "ball"]}
INT_LIST = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}
FRACTIONS = {"type": "array", "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


PARAMS = {
    "arithmetic": _obj({"qmax": {"type": "integer", "minimum": 1}, "xmax": {"type": "integer", "minimum": 2},
                        "samples": {"type": "integer", "minimum": 1}}),
    "gauss-decay": _obj({"qmax": {"type": "integer", "minimum": 2}, "kprime": {"type": "integer", "minimum": 0},
                         "kdoubleprime": {"type": "integer", "minimum": 0}, "k": {"type": "integer", "minimum": 1},
                         "degree": {"type": "integer", "minimum": 1}}),
    "theta-asymptotic": _obj({"bodies": {"type": "array", "items": BODY},
                              "exponents": {"type": "array", "items": {"type": "integer", "minimum": 1}}}),
    "multiplier-sweep": _obj({"body": BODY, "kprime": {"type": "integer", "minimum": 0},
                              "kdoubleprime": {"type": "integer", "minimum": 0},
                              "degree": {"type": "integer", "minimum": 1}, "N": {"type": "integer", "minimum": 2},
                              "points": {"type": "integer", "minimum": 1},
                              "kinds": {"type": "array", "items": {"enum": [
                                  "discrete-average", "discrete-singular",
                                  "continuous-average", "continuous-singular"]}}}),
    "major-arc": _obj({"fractions": FRACTIONS, "exponents": INT_LIST,
                       "kinds": {"type": "array", "items": {"enum": ["average", "singular"]}}}),
    "envelope": _obj({"k": {"type": "integer", "minimum": 1, "maximum": 2}, "degree": {"type": "integer", "minimum": 1},
                      "body": BODY, "N": {"type": "number", "exclusiveMinimum": 0},
                      "points": {"type": "integer", "minimum": 1}}),
    "variation-study": _obj({"sequences": {"type": "integer", "minimum": 1}, "length": {"type": "integer", "minimum": 2},
                             "r": {"type": "array", "items": {"type": "number", "minimum": 1}},
                             "rho": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}}),
    "convergence-study": _obj({"exponents": INT_LIST, "box": {"type": "integer", "minimum": 0},
                               "random_functions": {"type": "integer", "minimum": 0},
                               "telescoping": {"type": "array", "items": INT_LIST}}),
    "weyl-scan": _obj({"axes": {"enum": ["integers", "primes"]}, "degree": {"type": "integer", "minimum": 1},
                       "N": INT_LIST, "trials": {"type": "integer", "minimum": 1},
                       "Q": {"type": "integer", "minimum": 1}, "beta": {"type": "number", "exclusiveMinimum": 0}}),
    "minor-arc": _obj({"frequencies": {"type": "integer", "minimum": 1}, "exponents": INT_LIST,
                       "beta": {"type": "number", "exclusiveMinimum": 0}}),
    "iw-build": _obj({"n": {"type": "integer", "minimum": 0}, "beta": {"type": "integer", "minimum": 1},
                      "cap": {"type": "integer", "minimum": 1}, "s_max": {"type": "integer", "minimum": 0},
                      "m_max": {"type": "integer", "minimum": 1}, "degree": {"type": "integer", "minimum": 1},
                      "rho": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                      "chi": {"type": "number", "exclusiveMinimum": 0}}),
    "xi-eval": _obj({"n": {"type": "integer", "minimum": 1}, "s": {"type": ["integer", "null"], "minimum": 0},
                     "beta": {"type": "integer", "minimum": 1}, "degree": {"type": "integer", "minimum": 1},
                     "points": {"type": "integer", "minimum": 1},
                     "rho": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                     "chi": {"type": "number", "exclusiveMinimum": 0}}),
}

SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"enum": sorted(PARAMS)},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "threads": {"type": "integer", "minimum": 1},
        "sieve": _obj({"limit": {"type": "integer", "minimum": 2}}),
        "params": {"type": "object"},
        "tolerance": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
    },
    "required": ["experiment"],
    "additionalProperties": False,
}


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    out: str = "results"
    threads: int = 1
    sieve_limit: int = 100_000
    params: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)


def _key_path(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        path = ".".join(filter(None, [path, ",".join(extra)]))
    elif err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        path = ".".join(filter(None, [path, ",".join(missing)]))
    return path or "<root>"


def _validate(instance, schema, prefix=""):
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(instance), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        key = _key_path(err)
        raise ConfigError(f"config key '{prefix}{key}': {err.message}")


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    _validate(data, SCHEMA)
    exp = data["experiment"]
    params = data.get("params", {})
    _validate(params, PARAMS[exp], prefix="params.")
    return ExperimentConfig(
        experiment=exp,
        seed=data.get("seed", 0),
        out=data.get("out", "results"),
        threads=data.get("threads", 1),
        sieve_limit=data.get("sieve", {}).get("limit", 100_000),
        params=params,
        tolerance=data.get("tolerance", {}),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    return parse_config(data)

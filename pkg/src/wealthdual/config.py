"""Experiment configuration files.

A config is a TOML document::

    experiment = "duality_energy"
    seed = 7
    trials = 1000000
    threads = 1

    [measure]
    family = "uniform"

    [duality_energy]
    x = 0.7
    y = 1.3
    times = [0.5, 1.0, 2.0]

    [tolerance]
    sigma = 3.0

The table named after the experiment holds its parameters.  Unknown keys
are rejected, missing required keys are reported by their dotted name, and
every default is filled in before anything runs.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

REQUIRED = object()

# key -> (default, type); type is one of "int", "float", "str", "bool",
# "floats" (scalar or list of floats), "matrix", "table" or a tuple of choices
EXPERIMENTS = {
    "canonical": {
        "about": "canonical / grand-canonical pairs (eps s, (1 - eps) s) of the energy model",
        "params": {
            "s": (1.0, "float"),
            "s_law": ("point", ("point", "gamma")),
            "s_shape": (2.0, "float"),
            "s_rate": (1.0, "float"),
            "max_level": (4, "int"),
            "bins": (50, "int"),
        },
        "tolerance": {"ks_max": (None, "float"), "sigma": (3.0, "float"),
                      "harmonic_sigma": (4.0, "float")},
    },
    "wealth_stationary": {
        "about": "stationary wealth pairs (eps_inf s, (1 - eps_inf) s) evolved for t_end",
        "params": {
            "lambda": (REQUIRED, "float"),
            "s": (1.0, "float"),
            "t_end": (5.0, "float"),
            "max_order": (3, "int"),
            "bins": (50, "int"),
        },
        "tolerance": {"sigma": (4.0, "float")},
    },
    "product_check": {
        "about": "invariance of a product density mu(x) mu(y) under the energy model",
        "params": {
            "mu": (REQUIRED, ("exponential", "gamma", "pareto1")),
            "mu_params": ({}, "table"),
        },
        "tolerance": {"sup_max": (1e-8, "float")},
    },
    "duality_energy": {
        "about": "two-sided duality E_x D(n, m; X_t) = E_(n,m) D(N_t; x) for the energy model",
        "params": {
            "x": (REQUIRED, "float"),
            "y": (REQUIRED, "float"),
            "max_order": (4, "int"),
            "times": ([0.5, 1.0, 2.0], "floats"),
        },
        "tolerance": {"sigma": (3.0, "float")},
    },
    "duality_wealth": {
        "about": "two-sided duality for the wealth model with x + y = 1",
        "params": {
            "lambda": (REQUIRED, "float"),
            "x": (REQUIRED, "float"),
            "y": (REQUIRED, "float"),
            "max_order": (3, "int"),
            "times": ([0.5, 1.0, 2.0], "floats"),
        },
        "tolerance": {"sigma": (3.0, "float")},
    },
    "diffusion": {
        "about": "Euler-Maruyama r-diffusion relaxing to its stationary law",
        "params": {
            "drift": ("linear", ("linear", "from_measure")),
            "alpha": (2.0, "float"),
            "s": (1.0, "float"),
            "r0": (0.5, "float"),
            "dt": (1e-3, "float"),
            "t_end": (50.0, "float"),
            "paths": (None, "int"),
            "bins": (50, "int"),
        },
        "tolerance": {"ks_max": (0.015, "float")},
    },
    "nagent": {
        "about": "N-agent mean wealth profile against the random-walk heat kernel",
        "params": {
            "topology": ("ring", ("ring", "complete", "matrix")),
            "n": (10, "int"),
            "lambda": (REQUIRED, "float"),
            "t_end": ([0.5, 1.0, 2.0], "floats"),
            "trials": (None, "int"),
            "x0": ("unit", "x0"),
            "matrix": (None, "matrix"),
        },
        "tolerance": {"sigma": (3.0, "float")},
    },
    "eps_infinity": {
        "about": "moments of the stationary fraction eps_inf against the alpha recursion",
        "params": {
            "lambda": (REQUIRED, "float"),
            "lambda2": (None, "float"),
            "n_max": (6, "int"),
            "separation": (False, "bool"),
            "bins": (50, "int"),
        },
        "tolerance": {"sigma": (4.0, "float"), "ks_min": (0.02, "float"),
                      "null_factor": (5.0, "float")},
    },
}

TOP_LEVEL = {"experiment", "seed", "trials", "threads", "out", "measure", "tolerance"}
MEASURE_KEYS = {
    "uniform": set(),
    "beta": {"a", "b"},
    "pareto": {"alpha"},
    "induced": {"mu", "mu_params"},
}
DEFAULT_TRIALS = 100_000


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    trials: int
    threads: int
    out: str | None
    measure: dict
    params: dict
    tolerance: dict
    source: dict = field(default_factory=dict, repr=False)

    def resolved(self) -> dict:
        """Plain-data view with all defaults filled in."""
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "trials": self.trials,
            "threads": self.threads,
            "out": self.out,
            "measure": self.measure,
            self.experiment: self.params,
            "tolerance": self.tolerance,
        }


def _check_type(key, value, kind):
    if isinstance(kind, tuple):
        if value not in kind:
            raise ConfigError(f"{key}: expected one of {list(kind)}, got {value!r}")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true or false, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    if kind == "floats":
        vals = value if isinstance(value, list) else [value]
        if not vals:
            raise ConfigError(f"{key}: empty list")
        return [_check_type(key, v, "float") for v in vals]
    if kind == "x0":
        if value == "unit" or value == "uniform":
            return value
        if isinstance(value, list):
            return [_check_type(key, v, "float") for v in value]
        raise ConfigError(f"{key}: expected 'unit', 'uniform' or a list of wealths")
    if kind == "matrix":
        if not (isinstance(value, list) and all(isinstance(r, list) for r in value)):
            raise ConfigError(f"{key}: expected a list of rows")
        return [[_check_type(key, v, "float") for v in row] for row in value]
    if kind == "table":
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected a table")
        return {k: _check_type(f"{key}.{k}", v, "float") for k, v in value.items()}
    raise AssertionError(kind)


def _fill(section: str, given: dict, schema: dict) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{section}: expected a table")
    unknown = sorted(set(given) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key '{section}.{unknown[0]}'")
    out = {}
    for key, (default, kind) in schema.items():
        name = f"{section}.{key}"
        if key in given:
            out[key] = _check_type(name, given[key], kind)
        elif default is REQUIRED:
            raise ConfigError(f"missing key '{name}'")
        else:
            out[key] = copy.deepcopy(default)
    return out


def _measure_block(given: dict) -> dict:
    if not isinstance(given, dict):
        raise ConfigError("measure: expected a table")
    family = given.get("family", "uniform")
    if family not in MEASURE_KEYS:
        raise ConfigError(f"measure.family: expected one of {sorted(MEASURE_KEYS)}, "
                          f"got {family!r}")
    allowed = MEASURE_KEYS[family] | {"family"}
    unknown = sorted(set(given) - allowed)
    if unknown:
        raise ConfigError(f"unknown key 'measure.{unknown[0]}' for family {family!r}")
    out = {"family": family}
    if family == "beta":
        if "a" not in given:
            raise ConfigError("missing key 'measure.a'")
        out["a"] = _check_type("measure.a", given["a"], "float")
        out["b"] = _check_type("measure.b", given.get("b", given["a"]), "float")
    elif family == "pareto":
        if "alpha" not in given:
            raise ConfigError("missing key 'measure.alpha'")
        out["alpha"] = _check_type("measure.alpha", given["alpha"], "float")
    elif family == "induced":
        if "mu" not in given:
            raise ConfigError("missing key 'measure.mu'")
        out["mu"] = _check_type("measure.mu", given["mu"], ("gamma", "exponential", "pareto1"))
        out["mu_params"] = _check_type("measure.mu_params", given.get("mu_params", {}), "table")
    return out


def _positive(name, value):
    if value is not None and value <= 0:
        raise ConfigError(f"{name}: must be positive, got {value}")


def _validate_values(cfg: ExperimentConfig) -> None:
    p, e = cfg.params, cfg.experiment
    for key in ("lambda", "lambda2"):
        if p.get(key) is not None and not 0.0 <= p[key] < 1.0:
            raise ConfigError(f"{e}.{key}: must lie in [0, 1), got {p[key]}")
    for key in ("s", "t_end", "dt", "paths", "trials", "n_max", "bins", "alpha"):
        if key in p and not isinstance(p[key], list):
            _positive(f"{e}.{key}", p[key])
    for key in ("times", "t_end"):
        if isinstance(p.get(key), list) and any(v < 0 for v in p[key]):
            raise ConfigError(f"{e}.{key}: times must be nonnegative")
    if "max_order" in p and p["max_order"] < 0:
        raise ConfigError(f"{e}.max_order: must be nonnegative")
    if e == "duality_wealth" and abs(p["x"] + p["y"] - 1.0) > 1e-12:
        raise ConfigError("duality_wealth.x: wealth duality needs x + y = 1")
    if e == "diffusion":
        if not 0.0 < p["r0"] < 1.0:
            raise ConfigError("diffusion.r0: must lie in (0, 1)")
        if p["dt"] > 1e-2:
            raise ConfigError("diffusion.dt: must not exceed 1e-2")
    if e == "nagent":
        if p["topology"] == "matrix" and p["matrix"] is None:
            raise ConfigError("missing key 'nagent.matrix' for topology 'matrix'")
        if p["n"] < 2:
            raise ConfigError("nagent.n: need at least two agents")


def parse(data: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Validate a decoded config table; ``overrides`` replace top-level keys."""
    data = dict(data)
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    if "experiment" not in data:
        raise ConfigError("missing key 'experiment'")
    exp = data["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment: expected one of {sorted(EXPERIMENTS)}, got {exp!r}")
    unknown = sorted(set(data) - TOP_LEVEL - {exp})
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}'")
    schema = EXPERIMENTS[exp]
    seed = _check_type("seed", data.get("seed", 0), "int")
    if seed < 0:
        raise ConfigError("seed: must be nonnegative")
    trials = _check_type("trials", data.get("trials", DEFAULT_TRIALS), "int")
    if trials <= 0:
        raise ConfigError(f"trials: must be positive, got {trials}")
    threads = _check_type("threads", data.get("threads", 1), "int")
    if threads <= 0:
        raise ConfigError("threads: must be positive")
    out = data.get("out")
    if out is not None:
        out = _check_type("out", out, "str")
    cfg = ExperimentConfig(
        experiment=exp,
        seed=seed,
        trials=trials,
        threads=threads,
        out=out,
        measure=_measure_block(data.get("measure", {})),
        params=_fill(exp, data.get(exp, {}), schema["params"]),
        tolerance=_fill("tolerance", data.get("tolerance", {}), schema["tolerance"]),
        source=data,
    )
    if (overrides or {}).get("trials") is not None:
        for key in ("trials", "paths"):
            if key in cfg.params:
                cfg.params[key] = None
    _validate_values(cfg)
    return cfg


def load(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse(data, overrides)

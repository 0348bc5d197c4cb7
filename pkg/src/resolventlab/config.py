"""Strict experiment configuration (YAML or JSON).

Physics parameters have no defaults: the dimension, grid, potentials and
every epsilon/tau value must be written out.  Unknown keys are rejected
with their full key path.
"""
import copy
import json
import math
from pathlib import Path

import yaml

from .helmholtz import Sponge
from .potentials import KINDS, ROLES, PotentialSpec


class ConfigError(ValueError):
    """Schema violation; the message starts with the offending key path."""


REQUIRED_PARAMS = {
    "zero": (),
    "inverse_power": ("c", "gamma_pow"),
    "smooth_inverse_power": ("c", "alpha_pow"),
    "offset_inverse_power": ("c", "p"),
    "exp_well": ("mu", "b", "gamma_g"),
    "neumann_table": ("r", "v"),
}
OPTIONAL_PARAMS = {"exp_well": ("form", "shift")}

NUMBER = (int, float)

# block -> {key: (type, required)}
SCHEMA = {
    "grid": {"n": (int, True), "rmax": (NUMBER, True), "mode_l": (int, False)},
    "checks": {"gamma": (NUMBER, False), "rho": (NUMBER, False), "tau0_list": (list, False)},
    "multiplier": {
        "kind": (str, True), "R": (NUMBER, False), "epsilon": (NUMBER, False), "alpha": (NUMBER, False),
        "kappa": (NUMBER, False), "h_profile": (dict, False), "R_list": (list, False),
        "interval_count": (int, False), "interval_seed": (int, False),
    },
    "problem": {
        "tau": (NUMBER, True), "epsilon": (NUMBER, True), "sign": (str, False), "tau_sign": (str, False),
        "boundary": ((str, dict), False),
    },
    "rhs": {"kind": (str, True), "center": (NUMBER, False), "width": (NUMBER, False), "j": (int, False),
            "path": (str, False)},
    "identities": {"list": (list, False), "phi": (dict, False), "R": (NUMBER, False), "multiplier": (str, False),
                   "refinements": (int, False)},
    "sweep": {
        "estimate": (str, True), "tau_list": (list, True), "epsilon_list": (list, True), "R_list": (list, False),
        "rho": (NUMBER, False), "alpha": (NUMBER, False), "gamma": (NUMBER, False), "sign": (str, False),
        "tau_sign": (str, False), "boundary": ((str, dict), False),
    },
    "data": {"family": (str, True), "seed": (int, True), "count": (int, True)},
    "evolution": {"T": (NUMBER, True), "dt": (NUMBER, False), "R_list": (list, True), "project": (list, False),
                  "method": (str, False), "form": (str, False)},
    "spectrum": {"boundary": ((str, dict), False), "select": (list, False)},
    "tolerances": {
        "residual": (NUMBER, False), "identity": (NUMBER, False), "max_over_min": (NUMBER, False),
        "abs_slope": (NUMBER, False), "orthonormality": (NUMBER, False), "eigen_residual": (NUMBER, False),
        "refinement_ratio": (NUMBER, False), "bilaplacian": (NUMBER, False), "R_spread": (NUMBER, False), "terms": (list, False),
    },
    "output": {"path": (str, False), "format": (str, False)},
}
TOP = {"dimension": (int, True), "mode_l": (int, False), "potentials": (list, False)}

TOLERANCE_DEFAULTS = {
    "residual": 1e-10,
    "identity": 1e-2,
    "orthonormality": 1e-10,
    "eigen_residual": 1e-9,
    "refinement_ratio": 3.5,
    "bilaplacian": 1e-4,
}


def _check_type(path, value, typ):
    if typ is NUMBER:
        ok = isinstance(value, NUMBER) and not isinstance(value, bool)
    elif typ is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, typ)
    if not ok:
        raise ConfigError(f"{path}: expected {getattr(typ, '__name__', typ)}, got {type(value).__name__}")


def _check_block(path, block, spec):
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected a mapping")
    for key in block:
        if key not in spec:
            raise ConfigError(f"{path}.{key}: unknown key")
    for key, (typ, required) in spec.items():
        if key not in block:
            if required:
                raise ConfigError(f"{path}.{key}: missing required key")
            continue
        _check_type(f"{path}.{key}", block[key], typ)


def _check_numbers(path, values):
    for i, v in enumerate(values):
        _check_type(f"{path}[{i}]", v, NUMBER)


def validate(cfg):
    """Raise ConfigError on any schema violation; return a deep copy."""
    if not isinstance(cfg, dict):
        raise ConfigError("<root>: expected a mapping")
    cfg = copy.deepcopy(cfg)
    for key in cfg:
        if key not in TOP and key not in SCHEMA:
            raise ConfigError(f"{key}: unknown key")
    for key, (typ, required) in TOP.items():
        if key not in cfg:
            if required:
                raise ConfigError(f"{key}: missing required key")
            continue
        _check_type(key, cfg[key], typ)
    for name, spec in SCHEMA.items():
        if name in cfg:
            _check_block(name, cfg[name], spec)
    if cfg["dimension"] < 2:
        raise ConfigError("dimension: must be >= 2")
    if "mode_l" in cfg and "grid" in cfg and "mode_l" in cfg["grid"]:
        raise ConfigError("grid.mode_l: given twice (also at top level)")
    if "grid" in cfg and cfg["grid"]["n"] < 5:
        raise ConfigError("grid.n: need at least 5 nodes")
    if "grid" in cfg and not cfg["grid"]["rmax"] > 0:
        raise ConfigError("grid.rmax: must be positive")
    if "multiplier" in cfg and "h_profile" in cfg["multiplier"]:
        hp = cfg["multiplier"]["h_profile"]
        _check_block("multiplier.h_profile", hp, {"amplitude": (NUMBER, True), "power": (NUMBER, True)})
    for i, p in enumerate(cfg.get("potentials", [])):
        _check_potential(f"potentials[{i}]", p)
    for block, keys in (("sweep", ("tau_list", "epsilon_list", "R_list")), ("checks", ("tau0_list",)),
                        ("multiplier", ("R_list",)), ("evolution", ("R_list", "project")),
                        ("spectrum", ("select",))):
        for k in keys:
            if block in cfg and k in cfg[block]:
                _check_numbers(f"{block}.{k}", cfg[block][k])
    for block in ("problem", "sweep", "spectrum"):
        if block in cfg and "boundary" in cfg[block]:
            parse_boundary(f"{block}.boundary", cfg[block]["boundary"])
    if "sweep" in cfg:
        eps = cfg["sweep"]["epsilon_list"]
        if not eps:
            raise ConfigError("sweep.epsilon_list: must not be empty")
        if any(e <= 0 for e in eps):
            raise ConfigError("sweep.epsilon_list: every epsilon must be positive")
        if not cfg["sweep"]["tau_list"]:
            raise ConfigError("sweep.tau_list: must not be empty")
    if "problem" in cfg and cfg["problem"]["epsilon"] <= 0:
        raise ConfigError("problem.epsilon: must be positive")
    if "identities" in cfg and "phi" in cfg["identities"]:
        _check_block("identities.phi", cfg["identities"]["phi"],
                     {"kind": (str, True), "width": (NUMBER, False), "alpha": (NUMBER, False), "R": (NUMBER, False),
                      "value": (NUMBER, False)})
    if "output" in cfg and cfg["output"].get("format", "csv") not in ("csv", "json"):
        raise ConfigError("output.format: must be 'csv' or 'json'")
    return cfg


def _check_potential(path, p):
    if not isinstance(p, dict):
        raise ConfigError(f"{path}: expected a mapping")
    for key in p:
        if key not in ("kind", "params", "role", "angular_sup"):
            raise ConfigError(f"{path}.{key}: unknown key")
    if "kind" not in p:
        raise ConfigError(f"{path}.kind: missing required key")
    kind = p["kind"]
    if kind not in KINDS or kind == "manufactured":
        raise ConfigError(f"{path}.kind: unsupported kind {kind!r}")
    if "role" in p and p["role"] not in ROLES:
        raise ConfigError(f"{path}.role: unknown role {p['role']!r}")
    params = p.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{path}.params: expected a mapping")
    allowed = REQUIRED_PARAMS[kind] + OPTIONAL_PARAMS.get(kind, ())
    for key in params:
        if key not in allowed:
            raise ConfigError(f"{path}.params.{key}: unknown parameter for {kind}")
    for key in REQUIRED_PARAMS[kind]:
        if key not in params:
            raise ConfigError(f"{path}.params.{key}: missing required parameter")


def parse_boundary(path, value):
    if value == "dirichlet":
        return "dirichlet"
    if isinstance(value, dict) and set(value) == {"sponge"} and isinstance(value["sponge"], dict):
        sp = value["sponge"]
        for key in sp:
            if key not in ("width", "strength"):
                raise ConfigError(f"{path}.sponge.{key}: unknown key")
        for key in ("width", "strength"):
            if key not in sp:
                raise ConfigError(f"{path}.sponge.{key}: missing required key")
            _check_type(f"{path}.sponge.{key}", sp[key], NUMBER)
        return Sponge(float(sp["width"]), float(sp["strength"]))
    raise ConfigError(f"{path}: expected 'dirichlet' or {{sponge: {{width, strength}}}}")


def build_potentials(cfg):
    out = []
    for p in cfg.get("potentials", []):
        params = dict(p.get("params", {}))
        out.append(PotentialSpec(p["kind"], params, p.get("role", "V_repulsive"), p.get("angular_sup")))
    return tuple(out)


def load(path):
    """Read and validate a YAML or JSON configuration file."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file {path} not found")
    text = p.read_text()
    if p.suffix == ".json":
        data = json.loads(text)
    else:
        data = yaml.safe_load(text)
    return validate(data)


def grid_mode(cfg):
    """Spherical-harmonic degree from ``grid.mode_l`` or top-level ``mode_l``."""
    return cfg.get("grid", {}).get("mode_l", cfg.get("mode_l", 0))


def tolerance(cfg, key):
    return cfg.get("tolerances", {}).get(key, TOLERANCE_DEFAULTS.get(key, math.inf))

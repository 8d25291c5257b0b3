"""Scenario configuration: a JSON document with fixed sections and documented keys.

Every key has a default, a validator and a one-line meaning.  Unknown
sections or keys are rejected, so a typo never silently falls back to a
default.  ``echo_config`` prints the effective record, which reloads to an
identical record.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import GridSpec, ModelParams
from ..solver import SolverConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _num(lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False):
    def check(key, value):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{key}: expected a finite number, got {value!r}")
        if value < lo or (lo_open and value == lo) or value > hi or (hi_open and value == hi):
            left = "(" if lo_open else "["
            right = ")" if hi_open else "]"
            raise ConfigError(f"{key}: value {value!r} outside {left}{lo}, {hi}{right}")
        return float(value)
    return check


def _int(lo=1, hi=10**9):
    def check(key, value):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        if not lo <= value <= hi:
            raise ConfigError(f"{key}: value {value} outside [{lo}, {hi}]")
        return value
    return check


def _choice(*options):
    def check(key, value):
        if value not in options:
            raise ConfigError(f"{key}: expected one of {list(options)}, got {value!r}")
        return value
    return check


def _bool(key, value):
    if not isinstance(value, bool):
        raise ConfigError(f"{key}: expected true or false, got {value!r}")
    return value


def _dt(key, value):
    if value == "auto":
        return value
    return _num(0.0, lo_open=True)(key, value)


def _alpha(key, value):
    if isinstance(value, list):
        return [_num(0.0, 1.0)(f"{key}[{i}]", v) for i, v in enumerate(value)]
    return _num(0.0, 1.0)(key, value)


def _u_nodes(key, value):
    if value is None:
        return None
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key}: expected null or a non-empty list of activity values")
    return [_num(0.0, 1.0)(f"{key}[{i}]", v) for i, v in enumerate(value)]


def _densities(key, value):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key}: expected a non-empty list of densities")
    return [_num(0.0, 1.0, lo_open=True, hi_open=True)(f"{key}[{i}]", v) for i, v in enumerate(value)]


def _path(key, value):
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{key}: expected a non-empty file name")
    return value


#: section -> key -> (default, validator, meaning)
SCHEMA: dict = {
    "grid": {
        "n_x": (64, _int(), "number of x-cells on the periodic road [0, 1)"),
        "n_v": (64, _int(2), "number of velocity cells on [0, 1]"),
        "n_u": (1, _int(), "number of activity classes on [0, 1]"),
        "u_nodes": (None, _u_nodes, "explicit activity class values (null: cell centres); design decision"),
    },
    "model": {
        "alpha": (1.0, _alpha, "road quality alpha in [0, 1], scalar or one value per x-cell"),
        "L": (0.1, _num(0.0, 1.0), "visibility scale; visibility length ell_v = alpha L"),
        "d_c": (0.2, _num(0.0, 1.0, lo_open=True), "speed-gap cutoff d_c of the mean-field interaction"),
        "kappa": (0.05, _num(0.0, lo_open=True), "spread parameter kappa of the velocity bounds and Gaussians"),
        "eta0": (1.0, _num(0.0), "base encounter rate eta_0"),
        "gamma_eta": (1.0, _num(0.0), "density sensitivity gamma_eta of the encounter rate"),
        "gamma_mu": (1.0, _num(0.0), "density sensitivity gamma_mu of the external rate"),
        "sigma_floor": (1e-8, _num(0.0, lo_open=True), "lower bound on Gaussian variances; design decision"),
        "perceived": ("linear", _choice("linear", "gradient"), "perceived-density map rho_p"),
        "n_z": (8, _int(), "midpoint nodes of the look-ahead integral over z*; design decision"),
        "row_rule": ("cell", _choice("cell", "midpoint"), "discretisation of A per v-cell; design decision"),
    },
    "initial": {
        "profile": ("uniform", _choice("uniform", "gaussian_bump", "two_cluster"), "named initial condition"),
        "rho0": (0.3, _num(0.0, 1.0), "background density"),
        "amplitude": (0.3, _num(-1.0, 10.0), "relative height of the density bump (gaussian_bump)"),
        "x0": (0.5, _num(0.0, 1.0), "bump centre (gaussian_bump)"),
        "width": (0.1, _num(0.0, 1.0, lo_open=True), "bump width (gaussian_bump)"),
        "v_profile": ("uniform", _choice("uniform", "gaussian"),
                      "velocity profile for uniform and gaussian_bump"),
        "v_mean": (0.5, _num(0.0, 1.0), "centre of the gaussian velocity profile"),
        "v_width": (0.15, _num(0.0, 1.0, lo_open=True), "width of the gaussian velocity profile"),
        "v_low": (0.3, _num(0.0, 1.0), "slow cluster speed (two_cluster)"),
        "v_high": (0.7, _num(0.0, 1.0), "fast cluster speed (two_cluster)"),
        "cluster_width": (0.08, _num(0.0, 1.0, lo_open=True), "cluster width in v (two_cluster)"),
        "fast_fraction": (0.5, _num(0.0, 1.0), "share of vehicles in the fast cluster (two_cluster)"),
    },
    "action": {
        "kind": ("none", _choice("none", "tollgate"), "external action: none or the tollgate preset"),
        "strength": (5.0, _num(0.0), "tollgate intensity m in mu_0 = m 1_[x1,x2]"),
        "x1": (0.45, _num(0.0, 1.0), "start of the tollgate window"),
        "x2": (0.55, _num(0.0, 1.0), "end of the tollgate window"),
        "v_free": (0.8, _num(0.0, 1.0), "prescribed speed v_e at the entry of the window"),
        "v_gate": (0.2, _num(0.0, 1.0), "prescribed speed v_e at the gate (end of the window)"),
        "sigma_e": (0.05, _num(0.0, lo_open=True), "width sigma_e of the equilibrium velocity profile"),
    },
    "solver": {
        "dt": ("auto", _dt, "time step or auto = 0.5 min(dx, dv / max|F|, dt_pos)"),
        "t_end": (1.0, _num(0.0), "final time"),
        "splitting": ("strang", _choice("strang", "lie"), "operator splitting of the direct mode"),
        "mode": ("direct", _choice("direct", "fixed_point"), "direct time stepping or the fixed-point scheme"),
        "fp_tol": (1e-6, _num(0.0, lo_open=True), "fixed-point stopping tolerance (sup over time of L1)"),
        "fp_max_iters": (50, _int(), "fixed-point iteration cap"),
        "scheme": ("split", _choice("split", "characteristic"), "transport realisation; design decision"),
        "x_order": (3, _choice(1, 3), "Lagrange order of x interpolation; design decision"),
        "n_sub": (4, _int(4), "Heun substeps per characteristic trace"),
        "snapshot_every": (1, _int(), "record macroscopic fields every this many steps"),
        "keep_f": (False, _bool, "keep full distribution snapshots in memory"),
        "blowup_factor": (1e3, _num(1.0), "sup-norm growth that flags a blow-up"),
    },
    "diagram": {
        "densities": ([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9], _densities, "densities of the sweep"),
        "t_relax": (30.0, _num(0.0, lo_open=True), "relaxation time of each homogeneous run"),
        "settle_window": (1.0, _num(0.0, lo_open=True), "delta in the settled test: L1 norm of f(t) - f(t - delta)"),
        "settle_tol": (1e-3, _num(0.0, lo_open=True), "settled-test tolerance"),
    },
    "output": {
        "macro_csv": ("macro.csv", _path, "macroscopic CSV file name inside --out"),
        "snapshot": ("f_final.txt", _path, "final distribution snapshot file name inside --out"),
        "ledger": ("ledger.json", _path, "diagnostics ledger file name inside --out"),
    },
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully validated configuration; ``data`` maps section -> key -> value."""

    data: dict

    def section(self, name: str) -> dict:
        return dict(self.data[name])

    def grid(self) -> GridSpec:
        g = self.data["grid"]
        nodes = None if g["u_nodes"] is None else tuple(g["u_nodes"])
        return GridSpec(g["n_x"], g["n_v"], g["n_u"], nodes)

    def model_params(self) -> ModelParams:
        m = dict(self.data["model"])
        if isinstance(m["alpha"], list):
            m["alpha"] = np.array(m["alpha"])
        return ModelParams(**m)

    def solver_config(self, **overrides) -> SolverConfig:
        s = dict(self.data["solver"])
        s.update({k: v for k, v in overrides.items() if v is not None})
        return SolverConfig(**s)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=False)

    def replace(self, section: str, **changes) -> "ScenarioConfig":
        raw = json.loads(self.to_json())
        raw[section].update(changes)
        return parse_config(raw)


def parse_config(raw: dict) -> ScenarioConfig:
    """Validate a loaded document and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a JSON object")
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown section(s) {unknown}; allowed: {list(SCHEMA)}")
    data = {}
    for name, keys in SCHEMA.items():
        given = raw.get(name, {})
        if not isinstance(given, dict):
            raise ConfigError(f"{name}: expected an object")
        bad = sorted(set(given) - set(keys))
        if bad:
            raise ConfigError(f"{name}: unknown key(s) {bad}")
        section = {}
        for key, (default, check, _) in keys.items():
            value = given.get(key, default)
            section[key] = value if value is None and key == "u_nodes" else check(f"{name}.{key}", value)
        data[name] = section
    _cross_checks(data)
    return ScenarioConfig(data)


def _cross_checks(data):
    g, m, a = data["grid"], data["model"], data["action"]
    if g["u_nodes"] is not None and len(g["u_nodes"]) != g["n_u"]:
        raise ConfigError(f"grid.u_nodes: expected {g['n_u']} values, got {len(g['u_nodes'])}")
    if isinstance(m["alpha"], list) and len(m["alpha"]) != g["n_x"]:
        raise ConfigError(f"model.alpha: expected {g['n_x']} values, got {len(m['alpha'])}")
    alpha_max = max(m["alpha"]) if isinstance(m["alpha"], list) else m["alpha"]
    if alpha_max * m["L"] > 1:
        raise ConfigError("model.L: visibility length alpha*L exceeds 1")
    if a["kind"] == "tollgate" and not a["x1"] < a["x2"]:
        raise ConfigError("action.x1: tollgate window needs x1 < x2")


def load_config(path) -> ScenarioConfig:
    """Read and validate a JSON scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(raw)


def default_config() -> ScenarioConfig:
    return parse_config({})


def echo_config(cfg: ScenarioConfig) -> str:
    return cfg.to_json()


def config_docs_table() -> str:
    """Markdown table of every key with its default and meaning."""
    lines = ["| key | default | meaning |", "| --- | --- | --- |"]
    for name, keys in SCHEMA.items():
        for key, (default, _, doc) in keys.items():
            lines.append(f"| `{name}.{key}` | `{json.dumps(default)}` | {doc} |")
    return "\n".join(lines) + "\n"

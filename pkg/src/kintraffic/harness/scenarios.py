"""Named initial conditions and the tollgate preset."""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from ..core import GridSpec, mass
from ..kernels import ExternalAction
from .config import ScenarioConfig


def _cell_gaussian(grid: GridSpec, centre: float, width: float) -> np.ndarray:
    """Cell averages of ``exp(-(v - centre)^2 / width^2)`` over the v-cells."""
    e = (grid.v_edges - centre) / width
    return np.diff(erf(e)) * (0.5 * np.sqrt(np.pi) * width) / grid.dv


def velocity_profile(grid: GridSpec, init: dict) -> np.ndarray:
    """Unit-mass velocity profile ``psi`` (``sum psi dv = 1``)."""
    if init["profile"] == "two_cluster":
        fast = init["fast_fraction"]
        lo = _cell_gaussian(grid, init["v_low"], init["cluster_width"])
        hi = _cell_gaussian(grid, init["v_high"], init["cluster_width"])
        psi = (1.0 - fast) * lo / (lo.sum() * grid.dv) + fast * hi / (hi.sum() * grid.dv)
    elif init["v_profile"] == "gaussian":
        psi = _cell_gaussian(grid, init["v_mean"], init["v_width"])
    else:
        psi = np.ones(grid.n_v)
    return psi / (psi.sum() * grid.dv)


def density_profile(grid: GridSpec, init: dict) -> np.ndarray:
    rho = np.full(grid.n_x, init["rho0"])
    if init["profile"] == "gaussian_bump":
        d = grid.x - init["x0"]
        d = d - np.round(d)
        rho = rho * (1.0 + init["amplitude"] * np.exp(-(d / init["width"]) ** 2))
    if np.any(rho < 0) or np.any(rho > 1):
        raise ValueError("initial density leaves [0, 1]; reduce rho0 or amplitude")
    return rho


def initial_field(grid: GridSpec, init: dict) -> np.ndarray:
    """``f0(x, v, u) = rho(x) psi(v)``, the same in every activity class."""
    rho = density_profile(grid, init)
    psi = velocity_profile(grid, init)
    return rho[:, None, None] * psi[None, :, None] * np.ones((1, 1, grid.n_u))


def tollgate_action(grid: GridSpec, act: dict, target_mass: float) -> ExternalAction:
    """``mu0 = m 1_[x1, x2]`` with ``v_e`` falling linearly from ``v_free`` to ``v_gate`` across the window."""
    x = grid.x
    inside = (x >= act["x1"]) & (x <= act["x2"])
    mu0 = np.where(inside, act["strength"], 0.0)
    s = np.clip((x - act["x1"]) / (act["x2"] - act["x1"]), 0.0, 1.0)
    v_e = act["v_free"] + (act["v_gate"] - act["v_free"]) * s
    return ExternalAction.build(grid, mu0, v_e, act["sigma_e"], target_mass)


def build_scenario(cfg: ScenarioConfig):
    """``(grid, params, f0, action)`` for a validated configuration."""
    grid = cfg.grid()
    params = cfg.model_params()
    f0 = initial_field(grid, cfg.data["initial"])
    act = cfg.data["action"]
    action = tollgate_action(grid, act, mass(f0, grid)) if act["kind"] == "tollgate" else None
    return grid, params, f0, action


TOLLGATE_PRESET = {
    "grid": {"n_x": 64, "n_v": 32, "n_u": 2},
    "initial": {"profile": "gaussian_bump", "rho0": 0.25, "amplitude": 0.4, "x0": 0.25, "width": 0.1,
                "v_profile": "gaussian", "v_mean": 0.6, "v_width": 0.15},
    "action": {"kind": "tollgate", "strength": 5.0, "x1": 0.45, "x2": 0.55, "v_free": 0.8, "v_gate": 0.2},
    "solver": {"t_end": 1.0},
}

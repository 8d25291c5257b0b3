"""Invariant suite behind the ``check`` command.

Each property is measured on the configured scenario and reported with its
residual and tolerance.  ``density`` lets a test inject a faulty transition
density to confirm that the normalisation check can fail.
"""

from __future__ import annotations

import itertools

import numpy as np

from ..collision import CollisionWorkspace, collision_J
from ..core import mass, shift_x
from ..kernels import ExternalAction, integrate_transition_density, macro_inputs
from ..solver import SolverConfig, auto_dt, run, step_direct
from ..transport import FrozenForce, forward_trace
from .config import ScenarioConfig
from .scenarios import build_scenario


def _prop(name, residual, tol, **extra):
    return {"name": name, "passed": bool(residual <= tol), "residual": float(residual), "tolerance": tol, **extra}


def check_normalization(kappa: float, sigma_floor: float, density=None, n_side: int = 3):
    vals = np.linspace(0.0, 1.0, n_side)
    lattice = np.array(list(itertools.product(vals, repeat=5))).T
    total, degenerate = integrate_transition_density(*lattice, kappa=kappa, sigma_floor=sigma_floor,
                                                     density=density)
    residual = float(np.abs(total[~degenerate] - 1.0).max())
    return _prop("normalization", residual, 1e-6, degenerate_points=int(degenerate.sum()))


def check_invariants(cfg: ScenarioConfig, density=None, n_steps: int = 4, n_traces: int = 1000) -> dict:
    """Machine-readable report: one entry per property plus the solver counters."""
    grid, params, f0, action = build_scenario(cfg)
    props = [check_normalization(params.kappa, params.sigma_floor, density)]

    ws = CollisionWorkspace(grid, params)
    J = collision_J(f0, grid, params, ws)
    rho, _, eta, _ = macro_inputs(f0, grid, params)
    scale = max(float(np.max(eta * rho * rho)), 1e-300)
    per_cell = np.abs(J.sum(axis=2).sum(axis=1) * grid.dv * grid.du)
    props.append(_prop("collision_conservation", float(per_cell.max()) / scale, 1e-12))

    force = FrozenForce.from_field(f0, grid, params)
    rng = np.random.default_rng(0)
    x = rng.random(n_traces)
    v = rng.random(n_traces)
    u = rng.choice(grid.u, n_traces)
    _, clamps = forward_trace(x, v, u, 1.0, force, n_sub=64)
    props.append(_prop("support", clamps, 0, clamp_events=clamps))

    dt = auto_dt(f0, grid, params)
    if np.ndim(params.alpha) == 0 and np.isfinite(dt):
        k = max(1, grid.n_x // 4)
        a = shift_x(step_direct(f0, grid, params, action, dt), k)
        b = step_direct(shift_x(f0, k), grid, params, None if action is None else _shifted(action, k), dt)
        props.append(_prop("periodicity", float(np.abs(a - b).max()), 1e-12))

    config = SolverConfig(dt=dt, t_end=n_steps * dt) if np.isfinite(dt) else SolverConfig(t_end=0.0)
    traj = run(f0, grid, params, None, config)
    m0 = mass(f0, grid)
    drift = abs(traj.ledger[-1]["mass"] - m0) / m0 if m0 > 0 else 0.0
    props.append(_prop("mass_conservation", drift, 1e-3))
    props.append(_prop("nonnegativity", max(0.0, -min(r["min_f"] for r in traj.ledger)), 0.0))

    counters = traj.diagnostics.as_dict()
    return {"passed": all(p["passed"] for p in props), "properties": props, "counters": counters}


def _shifted(action, k):
    return ExternalAction(np.roll(action.mu0, k), np.roll(action.v_e, k), action.sigma_e, shift_x(action.f_e, k))


"""Time integration of the full model and the linearised fixed-point scheme.

The direct mode composes three substeps: transport with the force frozen from
the current field, an explicit Euler step of the interaction operator and the
exact relaxation toward the external equilibrium.  Strang composition is
``T(dt/2) R(dt/2) C(dt) R(dt/2) T(dt/2)``; Lie composition is ``T(dt) C(dt) R(dt)``.

The fixed-point mode repeatedly solves the linear problem
``f_t + v f_x + (F[f^n] f)_v = g^n`` on the whole time interval, with the
force and the source ``g^n = J[f^n] + mu (f_e - f^n)`` frozen at the previous
iterate and sampled piecewise constant in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .collision import CollisionWorkspace, collision_J, positivity_dt, relaxation_T
from .core import Diagnostics, FieldLike, GridSpec, MacroFields, ModelParams, as_array, l1_distance, mass, moments
from .kernels import ExternalAction, macro_inputs
from .transport import CFLError, FrozenForce, cfl_limit, transport_step


class GuardError(ValueError):
    """A step size violates the transport or positivity guard."""


@dataclass
class SolverConfig:
    dt: float | str = "auto"
    t_end: float = 1.0
    splitting: str = "strang"
    mode: str = "direct"
    fp_tol: float = 1e-6
    fp_max_iters: int = 50
    scheme: str = "split"
    x_order: int = 3
    n_sub: int = 4
    snapshot_every: int = 1
    keep_f: bool = False
    blowup_factor: float = 1e3

    def __post_init__(self):
        if isinstance(self.dt, str):
            if self.dt != "auto":
                raise ValueError(f"dt must be a positive number or 'auto', got {self.dt!r}")
        elif not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be > 0")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ValueError("t_end must be >= 0")
        if self.splitting not in ("lie", "strang"):
            raise ValueError("splitting must be 'lie' or 'strang'")
        if self.mode not in ("direct", "fixed_point"):
            raise ValueError("mode must be 'direct' or 'fixed_point'")
        if not self.fp_tol > 0:
            raise ValueError("fp_tol must be > 0")
        if int(self.fp_max_iters) != self.fp_max_iters or self.fp_max_iters < 1:
            raise ValueError("fp_max_iters must be an integer >= 1")
        if self.scheme not in ("split", "characteristic"):
            raise ValueError("scheme must be 'split' or 'characteristic'")
        if self.x_order not in (1, 3):
            raise ValueError("x_order must be 1 or 3")
        if self.n_sub < 4:
            raise ValueError("n_sub must be >= 4")
        if int(self.snapshot_every) != self.snapshot_every or self.snapshot_every < 1:
            raise ValueError("snapshot_every must be an integer >= 1")

    def replace(self, **changes) -> "SolverConfig":
        current = {f.name: getattr(self, f.name) for f in fields(self)}
        current.update(changes)
        return SolverConfig(**current)


@dataclass
class Trajectory:
    """Macroscopic snapshots, optional full fields and a per-snapshot ledger."""

    grid: GridSpec
    times: list = field(default_factory=list)
    macros: list = field(default_factory=list)
    f_snapshots: dict = field(default_factory=dict)
    ledger: list = field(default_factory=list)
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    final: np.ndarray | None = None
    blowup: bool = False
    extra: dict = field(default_factory=dict)

    def record(self, t: float, f: np.ndarray, keep_f: bool):
        self.times.append(float(t))
        self.macros.append(moments(f, self.grid))
        if keep_f:
            self.f_snapshots[float(t)] = f.copy()
        self.ledger.append({
            "t": float(t),
            "mass": mass(f, self.grid),
            "min_f": float(f.min()) if f.size else 0.0,
            "linf": float(np.abs(f).max()) if f.size else 0.0,
            **self.diagnostics.as_dict(),
        })


def _step_guards(f, grid, params, force):
    return cfl_limit(grid, force), positivity_dt(f, grid, params)


def auto_dt(f: FieldLike, grid: GridSpec, params: ModelParams) -> float:
    """``0.5 min(dx, dv / max|F|, dt_pos)`` for the current field."""
    values = as_array(f, grid)
    force = FrozenForce.from_field(values, grid, params)
    cfl, pos = _step_guards(values, grid, params, force)
    return 0.5 * min(cfl, pos)


def _collide(f, grid, params, dt, ws, diag):
    new = f + dt * collision_J(f, grid, params, ws, diag)
    negative = new < 0
    if np.any(negative):
        diag.floored_mass += float(-new[negative].sum() * grid.cell_volume)
        new = np.where(negative, 0.0, new)
    return new


def _relax(f, grid, params, action, dt):
    if action is None or not np.any(action.mu0):
        return f
    _, rho_p, _, _ = macro_inputs(f, grid, params)
    return relaxation_T(f, action.f_e, action.rate(rho_p, params.gamma_mu), dt)


def _transport(f, grid, params, dt, config, diag):
    force = FrozenForce.from_field(f, grid, params)
    try:
        return transport_step(f, grid, force, dt, scheme=config.scheme, x_order=config.x_order,
                              n_sub=config.n_sub, diag=diag)
    except CFLError as exc:
        raise GuardError(str(exc)) from exc


def step_direct(f: FieldLike, grid: GridSpec, params: ModelParams, action: ExternalAction | None, dt: float,
                config: SolverConfig | None = None, workspace: CollisionWorkspace | None = None,
                diag: Diagnostics | None = None) -> np.ndarray:
    """One split step of the full model.

    Raises ``GuardError`` if ``dt`` exceeds the transport guard or the
    positivity bound ``1 / max(eta rho)`` of the explicit interaction step.
    """
    config = config or SolverConfig()
    diag = diag if diag is not None else Diagnostics()
    ws = workspace if workspace is not None else CollisionWorkspace(grid, params)
    values = as_array(f, grid)
    if not dt > 0:
        raise GuardError("dt must be > 0")
    force = FrozenForce.from_field(values, grid, params)
    cfl, pos = _step_guards(values, grid, params, force)
    if dt > cfl * (1 + 1e-12):
        raise GuardError(f"dt={dt:.6g} exceeds the transport guard {cfl:.6g}")
    if dt > pos * (1 + 1e-12):
        raise GuardError(f"dt={dt:.6g} exceeds the positivity bound {pos:.6g} of the interaction step")
    if config.splitting == "strang":
        out = _transport(values, grid, params, 0.5 * dt, config, diag)
        out = _relax(out, grid, params, action, 0.5 * dt)
        out = _collide(out, grid, params, dt, ws, diag)
        out = _relax(out, grid, params, action, 0.5 * dt)
        return _transport(out, grid, params, 0.5 * dt, config, diag)
    out = _transport(values, grid, params, dt, config, diag)
    out = _collide(out, grid, params, dt, ws, diag)
    return _relax(out, grid, params, action, dt)


def time_grid(t_end: float, dt: float) -> np.ndarray:
    """Uniform steps of ``dt`` up to ``t_end``; the last step is shortened to land on it."""
    if t_end == 0:
        return np.array([0.0])
    n = max(1, math.ceil(t_end / dt - 1e-9))
    t = np.arange(n + 1) * dt
    t[-1] = t_end
    return t


def run(f0: FieldLike, grid: GridSpec, params: ModelParams, action: ExternalAction | None = None,
        config: SolverConfig | None = None) -> Trajectory:
    """Integrate to ``config.t_end`` in the configured mode and return the trajectory."""
    config = config or SolverConfig()
    if config.mode == "fixed_point":
        return fixed_point_solve(f0, grid, params, action, config).trajectory
    f = np.array(as_array(f0, grid), dtype=float)
    traj = Trajectory(grid)
    traj.record(0.0, f, config.keep_f)
    linf0 = max(float(np.abs(f).max()), 1e-300)
    ws = CollisionWorkspace(grid, params)
    t, step = 0.0, 0
    while t < config.t_end:
        dt = auto_dt(f, grid, params) if config.dt == "auto" else float(config.dt)
        if not math.isfinite(dt):
            dt = grid.dx
        last = t + dt >= config.t_end - 1e-12 * max(1.0, config.t_end)
        if last:
            dt = config.t_end - t
        f = step_direct(f, grid, params, action, dt, config, ws, traj.diagnostics)
        step += 1
        t = config.t_end if last else t + dt
        if step % config.snapshot_every == 0 or t >= config.t_end:
            traj.record(t, f, config.keep_f)
        linf = float(np.abs(f).max())
        if not math.isfinite(linf) or linf > config.blowup_factor * linf0:
            traj.blowup = True
            break
    traj.final = f
    return traj


@dataclass
class FixedPointResult:
    trajectory: Trajectory
    times: np.ndarray
    fields: list
    distances: list
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.distances)


def fixed_point_solve(f0: FieldLike, grid: GridSpec, params: ModelParams, action: ExternalAction | None = None,
                      config: SolverConfig | None = None, initial_data=None) -> FixedPointResult:
    """Iterate the linearised scheme until ``max_k ||f^{n+1}(t_k) - f^n(t_k)||_1 <= fp_tol``.

    The time grid is fixed for all iterations (``dt="auto"`` is evaluated once
    on ``f0``).  ``initial_data(n)`` may supply the initial field of iterate
    ``n``; by default every iterate starts from ``f0``.  Non-convergence is
    reported through ``converged=False`` together with the last iterate.
    """
    config = config or SolverConfig(mode="fixed_point")
    f0 = np.array(as_array(f0, grid), dtype=float)
    dt = auto_dt(f0, grid, params) if config.dt == "auto" else float(config.dt)
    if not math.isfinite(dt):
        dt = grid.dx
    times = time_grid(config.t_end, dt)
    previous = [f0] * len(times)
    ws = CollisionWorkspace(grid, params)
    diag = Diagnostics()
    distances = []
    converged = False
    mu_on = action is not None and np.any(action.mu0)
    for n in range(int(config.fp_max_iters)):
        start = f0 if initial_data is None else np.array(as_array(initial_data(n + 1), grid), dtype=float)
        current = [start]
        for k in range(len(times) - 1):
            h = previous[k]
            g = collision_J(h, grid, params, ws, diag)
            if mu_on:
                _, rho_p, _, _ = macro_inputs(h, grid, params)
                g = g + action.rate(rho_p, params.gamma_mu)[:, None, None] * (action.f_e - h)
            force = FrozenForce.from_field(h, grid, params, valid_time=(times[k], times[k + 1]))
            try:
                nxt = transport_step(current[k], grid, force, times[k + 1] - times[k], source=g,
                                     scheme=config.scheme, x_order=config.x_order, n_sub=config.n_sub, diag=diag)
            except CFLError as exc:
                raise GuardError(str(exc)) from exc
            current.append(nxt)
        distance = max(l1_distance(a, b, grid) for a, b in zip(current, previous))
        distances.append(distance)
        previous = current
        if not math.isfinite(distance):
            break
        if distance <= config.fp_tol:
            converged = True
            break
    traj = Trajectory(grid, diagnostics=diag)
    for k, t in enumerate(times):
        if k % config.snapshot_every == 0 or k == len(times) - 1:
            traj.record(t, previous[k], config.keep_f)
    traj.final = previous[-1]
    traj.blowup = not all(np.isfinite(d) for d in distances)
    traj.extra = {"distances": list(distances), "converged": converged, "iterations": len(distances)}
    return FixedPointResult(traj, times, previous, distances, converged)


def macro_at(traj: Trajectory, k: int = -1) -> MacroFields:
    return traj.macros[k]

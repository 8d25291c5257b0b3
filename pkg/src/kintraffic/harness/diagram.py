"""Fundamental diagram from spatially homogeneous relaxation runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import GridSpec, ModelParams, l1_distance, moments
from ..solver import SolverConfig, run


@dataclass(frozen=True)
class DiagramRow:
    rho: float
    mean_v: float
    flux: float
    settled: bool
    residual: float


def homogeneous_field(grid: GridSpec, rho0: float) -> np.ndarray:
    """Density ``rho0`` everywhere, uniform in ``v`` on [0, 1] and over the activity classes."""
    return np.full(grid.shape, float(rho0))


def fundamental_diagram(params: ModelParams, densities, t_relax: float, n_v: int = 32, u_value: float = 1.0,
                        dt: float | str = 0.5, settle_window: float = 1.0, settle_tol: float = 1e-3,
                        n_x: int = 1) -> list[DiagramRow]:
    """Long-time mean velocity and flux of homogeneous runs, one row per density.

    A homogeneous state stays homogeneous, so one x-cell represents the whole
    road.  A row is flagged ``settled=False`` when
    ``||f(t_relax) - f(t_relax - settle_window)||_1 > settle_tol``; the row is
    still reported.
    """
    if not 0 < settle_window < t_relax:
        raise ValueError("settle_window must lie in (0, t_relax)")
    grid = GridSpec(n_x, n_v, 1, (float(u_value),))
    rows = []
    for rho0 in densities:
        if not 0 < rho0 < 1:
            raise ValueError(f"densities must lie in (0, 1), got {rho0}")
        f0 = homogeneous_field(grid, rho0)
        quiet = dict(dt=dt, snapshot_every=10**9)
        early = run(f0, grid, params, None, SolverConfig(t_end=t_relax - settle_window, **quiet)).final
        late = run(early, grid, params, None, SolverConfig(t_end=settle_window, **quiet)).final
        residual = l1_distance(late, early, grid)
        m = moments(late, grid)
        rho = float(m.rho.mean())
        mean_v = float(m.mean_v.mean())
        rows.append(DiagramRow(rho, mean_v, rho * mean_v, residual <= settle_tol, residual))
    return rows


def is_nonincreasing(values, tol: float = 0.0) -> bool:
    values = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(values) <= tol))


def is_unimodal(values, tol: float = 0.0) -> bool:
    """Nondecreasing up to the maximum and nonincreasing after it, up to ``tol``."""
    values = np.asarray(values, dtype=float)
    k = int(np.argmax(values))
    return bool(np.all(np.diff(values[:k + 1]) >= -tol) and np.all(np.diff(values[k:]) <= tol))

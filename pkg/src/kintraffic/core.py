"""Grids, distribution fields, model parameters and macroscopic moments.

Everything here is nondimensional: position ``x`` lives on the periodic road
``[0, 1)``, velocity ``v`` and activity ``u`` on ``[0, 1]``.  A distribution
field is stored as a dense ``(n_x, n_v, n_u)`` array of cell values.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Union

import numpy as np

#: Vacuum threshold below which the mean velocity of a cell is reported as 0.
EPS_MASS = 1e-12


class GridError(ValueError):
    """Raised when an array does not match the grid it is used with."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform midpoint grid on ``[0,1) x [0,1] x [0,1]``.

    ``u_nodes`` optionally replaces the activity cell centres by explicit
    class values (for instance a single class at ``u = 1``); each class keeps
    the weight ``du = 1 / n_u``.
    """

    n_x: int
    n_v: int
    n_u: int = 1
    u_nodes: tuple | None = None

    def __post_init__(self):
        for name in ("n_x", "n_v", "n_u"):
            n = getattr(self, name)
            if int(n) != n or n < 1:
                raise ValueError(f"{name} must be a positive integer, got {n!r}")
            object.__setattr__(self, name, int(n))
        if self.u_nodes is not None:
            nodes = tuple(float(u) for u in np.atleast_1d(self.u_nodes))
            if len(nodes) != self.n_u or any(not 0.0 <= u <= 1.0 for u in nodes):
                raise ValueError(f"u_nodes must hold {self.n_u} values in [0, 1]")
            object.__setattr__(self, "u_nodes", nodes)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_x, self.n_v, self.n_u)

    @property
    def dx(self) -> float:
        return 1.0 / self.n_x

    @property
    def dv(self) -> float:
        return 1.0 / self.n_v

    @property
    def du(self) -> float:
        return 1.0 / self.n_u

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_x) + 0.5) * self.dx

    @property
    def v(self) -> np.ndarray:
        return (np.arange(self.n_v) + 0.5) * self.dv

    @property
    def u(self) -> np.ndarray:
        if self.u_nodes is not None:
            return np.array(self.u_nodes)
        return (np.arange(self.n_u) + 0.5) * self.du

    @property
    def v_edges(self) -> np.ndarray:
        return np.arange(self.n_v + 1) * self.dv

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dv * self.du

    def check(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != self.shape:
            raise GridError(f"field shape {values.shape} does not match grid {self.shape}")
        return values

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


@dataclass(frozen=True)
class DistributionField:
    """Nonnegative cell values of ``f(t, x, v, u)`` at one time.

    The array is copied and made read-only on construction.
    """

    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 3:
            raise GridError(f"expected a 3-d (x, v, u) array, got ndim={values.ndim}")
        if not np.all(np.isfinite(values)):
            raise ValueError("distribution values must be finite")
        if np.any(values < 0):
            raise ValueError(f"distribution values must be >= 0 (min={values.min():.3e})")
        if self.t < 0:
            raise ValueError("time stamp must be >= 0")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(*self.values.shape)


FieldLike = Union[DistributionField, np.ndarray]


def as_array(f: FieldLike, grid: GridSpec | None = None) -> np.ndarray:
    values = f.values if isinstance(f, DistributionField) else np.asarray(f, dtype=float)
    if grid is not None:
        grid.check(values)
    return values


@dataclass
class ModelParams:
    """Scalar and per-cell parameters of the traffic model.

    ``alpha`` is either a scalar or one value per x-cell.  The visibility
    length is ``ell_v = alpha * L``.
    """

    alpha: float | np.ndarray = 1.0
    L: float = 0.1
    d_c: float = 0.2
    kappa: float = 0.05
    eta0: float = 1.0
    gamma_eta: float = 1.0
    gamma_mu: float = 1.0
    sigma_floor: float = 1e-8
    perceived: str = "linear"
    n_z: int = 8
    row_rule: str = "cell"

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.ndim > 1:
            raise ValueError("alpha must be a scalar or a 1-d field over x-cells")
        if np.any(alpha < 0) or np.any(alpha > 1):
            raise ValueError(f"alpha must lie in [0, 1], got range [{alpha.min()}, {alpha.max()}]")
        if self.L < 0 or np.any(alpha * self.L > 1):
            raise ValueError("visibility length alpha*L must lie in [0, 1]")
        if not 0 < self.d_c <= 1:
            raise ValueError("d_c must lie in (0, 1]")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if self.eta0 < 0 or self.gamma_eta < 0 or self.gamma_mu < 0:
            raise ValueError("eta0, gamma_eta and gamma_mu must be >= 0")
        if self.sigma_floor <= 0:
            raise ValueError("sigma_floor must be > 0")
        if self.perceived not in ("linear", "gradient"):
            raise ValueError("perceived must be 'linear' or 'gradient'")
        if self.row_rule not in ("cell", "midpoint"):
            raise ValueError("row_rule must be 'cell' or 'midpoint'")
        if int(self.n_z) != self.n_z or self.n_z < 1:
            raise ValueError("n_z must be a positive integer")

    def alpha_field(self, grid: GridSpec) -> np.ndarray:
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.ndim == 0:
            return np.full(grid.n_x, float(alpha))
        if alpha.shape != (grid.n_x,):
            raise GridError(f"alpha has {alpha.size} values, grid has {grid.n_x} x-cells")
        return alpha.copy()

    def ell_v(self, grid: GridSpec) -> np.ndarray:
        return self.alpha_field(grid) * self.L

    def replace(self, **changes) -> "ModelParams":
        current = {f.name: getattr(self, f.name) for f in fields(self)}
        current.update(changes)
        return ModelParams(**current)


@dataclass(frozen=True)
class MacroFields:
    rho: np.ndarray
    mean_v: np.ndarray
    flux: np.ndarray


@dataclass
class Diagnostics:
    """Event counters accumulated by the solver substeps."""

    clamp_events: int = 0
    saturation_events: int = 0
    sigma_floor_hits: int = 0
    outflow_feet: int = 0
    floored_mass: float = 0.0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def density(f: FieldLike, grid: GridSpec) -> np.ndarray:
    """Local density ``rho(x) = sum_{v,u} f dv du`` per x-cell."""
    values = as_array(f, grid)
    return values.sum(axis=2).sum(axis=1) * (grid.dv * grid.du)


def moments(f: FieldLike, grid: GridSpec) -> MacroFields:
    values = as_array(f, grid)
    rho = density(values, grid)
    flux = (values.sum(axis=2) * grid.v).sum(axis=1) * (grid.dv * grid.du)
    mean_v = np.zeros_like(rho)
    occupied = rho > EPS_MASS
    mean_v[occupied] = flux[occupied] / rho[occupied]
    return MacroFields(rho=rho, mean_v=mean_v, flux=flux)


def mass(f: FieldLike, grid: GridSpec) -> float:
    return float(density(f, grid).sum() * grid.dx)


def l1_distance(f1: FieldLike, f2: FieldLike, grid: GridSpec) -> float:
    a = as_array(f1, grid)
    b = as_array(f2, grid)
    return float(np.abs(a - b).sum(axis=2).sum(axis=1).sum() * grid.cell_volume)


def linf_norm(f: FieldLike, grid: GridSpec | None = None) -> float:
    values = as_array(f, grid)
    return float(np.abs(values).max()) if values.size else 0.0


def shift_x(f: FieldLike, k: int) -> np.ndarray:
    """Periodic shift by ``k`` x-cells: ``out[ix] = f[ix - k]``."""
    return np.roll(as_array(f), k, axis=0)

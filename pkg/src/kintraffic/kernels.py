"""Microscopic interaction terms of the kinetic traffic model.

The functions here are pure and vectorised over numpy broadcasting where it
makes sense.  They cover

* perceived density maps (piecewise-linear Lipschitz map and the gradient map),
* encounter rate ``eta`` and external-action rate ``mu``,
* the post-interaction velocity interval ``[v_m, v_M]``, the partition
  functions and the transition probability density ``A``,
* the long-range acceleration kernel ``phi`` and the mean-field force it
  induces after integrating over the visibility zone ``[x, x + ell_v]``,
* the equilibrium field ``f_e`` that external actions relax towards.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import math

import numba
import numpy as np
from scipy.special import erf, erfc

from .core import FieldLike, GridSpec, ModelParams, as_array, density, mass

_LINEAR_RHO = np.array([0.0, 0.2, 0.8, 1.0])
_LINEAR_RHO_P = np.array([0.0, 0.1, 0.9, 1.0])


# ---------------------------------------------------------------------------
# perceived density, rates


def saturate(rho):
    """Clip densities to [0, 1]; return the clipped values and the number clipped."""
    rho = np.asarray(rho, dtype=float)
    n_out = int(np.count_nonzero((rho < 0) | (rho > 1)))
    return np.clip(rho, 0.0, 1.0), n_out


def perceived_density_linear(rho):
    """Piecewise-linear perceived density through (0,0), (0.2,0.1), (0.8,0.9), (1,1).

    Inputs outside [0, 1] are saturated first, so the map is total on the reals.
    """
    out = np.interp(np.clip(rho, 0.0, 1.0), _LINEAR_RHO, _LINEAR_RHO_P)
    return float(out) if np.ndim(out) == 0 else out


def perceived_density_gradient(rho, drho_dx):
    """Gradient-modulated perceived density (uses the Heaviside split on the sign of ``drho_dx``)."""
    rho = np.clip(np.asarray(rho, dtype=float), 0.0, 1.0)
    g = np.asarray(drho_dx, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        s = g / np.sqrt(1.0 + g * g)
    # +/- inf gradients: s -> +/- 1
    s = np.where(np.isposinf(g), 1.0, np.where(np.isneginf(g), -1.0, s))
    room = np.where(g >= 0, 1.0 - rho, rho)
    out = np.clip(rho + s * room, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def perceived_density_field(rho: np.ndarray, grid: GridSpec, params: ModelParams):
    """Perceived density per x-cell; returns ``(rho_p, n_saturated)``."""
    clipped, n_sat = saturate(rho)
    if params.perceived == "linear":
        return perceived_density_linear(clipped), n_sat
    drho = (np.roll(clipped, -1) - np.roll(clipped, 1)) / (2.0 * grid.dx)
    return perceived_density_gradient(clipped, drho), n_sat


def encounter_rate(rho_p, eta0: float = 1.0, gamma_eta: float = 1.0):
    """Encounter rate ``eta = eta0 (1 + gamma_eta rho_p)``."""
    out = eta0 * (1.0 + gamma_eta * np.asarray(rho_p, dtype=float))
    return float(out) if out.ndim == 0 else out


def external_rate(rho_p, mu0, gamma_mu: float = 1.0):
    """Intensity ``mu = mu0(x) (1 + gamma_mu rho_p)`` of the external action."""
    mu0 = np.asarray(mu0, dtype=float)
    if np.any(mu0 < 0):
        raise ValueError("mu0 must be nonnegative")
    out = mu0 * (1.0 + gamma_mu * np.asarray(rho_p, dtype=float))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# short-range interactions


class VelocityBounds(NamedTuple):
    v_m: float | np.ndarray
    v_M: float | np.ndarray

    @property
    def width(self):
        return self.v_M - self.v_m


def velocity_bounds(v_star, v_field, u, alpha, rho_p, kappa: float) -> VelocityBounds:
    """Interval reachable by a candidate at ``v_star`` meeting a field vehicle at ``v_field``."""
    v_star = np.asarray(v_star, dtype=float)
    v_field = np.asarray(v_field, dtype=float)
    au = np.asarray(alpha, dtype=float) * np.asarray(u, dtype=float)
    rho_p = np.asarray(rho_p, dtype=float)
    gap = np.abs(v_star - v_field)
    spread = gap + np.exp(-gap)
    v_m = np.maximum(0.0, np.minimum(v_star, v_field) - kappa * (1.0 - au) * rho_p * spread)
    v_M = np.minimum(1.0, np.maximum(v_star, v_field) + kappa * au * (1.0 - rho_p) * spread)
    if v_m.ndim == 0 and v_M.ndim == 0:
        return VelocityBounds(float(v_m), float(v_M))
    return VelocityBounds(v_m, v_M)


def _erf_diff(a, b):
    """``erf(b) - erf(a)`` without cancellation when both arguments share a sign."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    both_pos = (a > 0) & (b > 0)
    both_neg = (a < 0) & (b < 0)
    return np.where(both_pos, erfc(a) - erfc(b),
                    np.where(both_neg, erfc(-b) - erfc(-a), erf(b) - erf(a)))


def partition_Z(sigma, v_star, bounds: VelocityBounds, sigma_floor: float = 1e-8):
    """``Z(sigma) = int_{v_m}^{v_M} exp(-(v - v_star)^2 / sigma) dv`` in closed form.

    Variances below ``sigma_floor`` are raised to the floor.
    """
    sigma = np.maximum(np.asarray(sigma, dtype=float), sigma_floor)
    root = np.sqrt(sigma)
    lo = (np.asarray(bounds.v_m) - v_star) / root
    hi = (np.asarray(bounds.v_M) - v_star) / root
    z = 0.5 * np.sqrt(np.pi) * root * _erf_diff(lo, hi)
    return float(z) if z.ndim == 0 else z


def partition_Zp(p: int, bounds: VelocityBounds):
    """``Z_p = int_{v_m}^{v_M} (v_M - v)^p dv = (v_M - v_m)^(p+1) / (p+1)``."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    width = np.maximum(np.asarray(bounds.v_M) - np.asarray(bounds.v_m), 0.0)
    z = width ** (p + 1) / (p + 1)
    return float(z) if z.ndim == 0 else z


def branch_weights(v_star, v_field, u, alpha, rho_p, kappa: float, sigma_floor: float):
    """Gaussian weight, variance and polynomial exponent of the active branch.

    Equal speeds use the acceleration branch (``H(0) = 1``).
    """
    P = np.asarray(alpha, dtype=float) * np.asarray(u, dtype=float) * (1.0 - np.asarray(rho_p, dtype=float))
    accel = np.asarray(v_field) >= np.asarray(v_star)
    w_gauss = np.where(accel, 1.0 - P, P)
    sigma = np.where(accel, np.maximum(kappa * P, sigma_floor), np.maximum(kappa * (1.0 - P), sigma_floor))
    power = np.where(accel, 2, 1)
    return w_gauss, sigma, power


@numba.vectorize(["float64(float64, float64, float64, float64, float64, float64, float64, float64)"], cache=True)
def _density_nodes(v, v_star, sigma, c_gauss, c_poly, v_m, v_M, power):
    if v < v_m or v > v_M:
        return 0.0
    d = v - v_star
    gap = v_M - v
    return c_gauss * math.exp(-d * d / sigma) + c_poly * (gap * gap if power == 2.0 else gap)


def transition_density(v, v_star, v_field, u, alpha, rho_p, kappa: float = 0.05, sigma_floor: float = 1e-8):
    """Probability density ``A(v_star -> v; v_field, u, alpha, rho_p)`` of the post-interaction speed.

    Returns 0 outside ``[v_m, v_M]`` and on a degenerate (zero-width) interval,
    where the transition is a point mass that no density can represent.
    """
    v = np.asarray(v, dtype=float)
    v_star, v_field, u, alpha, rho_p = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (v_star, v_field, u, alpha, rho_p)))
    b = velocity_bounds(v_star, v_field, u, alpha, rho_p, kappa)
    v_m, v_M = np.asarray(b.v_m), np.asarray(b.v_M)
    w_gauss, sigma, power = branch_weights(v_star, v_field, u, alpha, rho_p, kappa, sigma_floor)
    width = v_M - v_m
    with np.errstate(divide="ignore", invalid="ignore"):
        z_gauss = np.asarray(partition_Z(sigma, v_star, VelocityBounds(v_m, v_M), sigma_floor))
        z_poly = width ** (power + 1) / (power + 1)
        c_gauss = np.where(width > 0, w_gauss / z_gauss, 0.0)
        c_poly = np.where((width > 0) & (w_gauss != 1.0), (1.0 - w_gauss) / z_poly, 0.0)
        out = _density_nodes(v, v_star, sigma, c_gauss, c_poly, v_m, v_M, power.astype(float))
    return float(out) if out.ndim == 0 else out


def integrate_transition_density(v_star, v_field, u, alpha, rho_p, kappa: float = 0.05, sigma_floor: float = 1e-8,
                                 n_points: int = 10_000, density=None):
    """``int_0^1 A dv`` by composite 10-point Gauss-Legendre, vectorised over parameter points.

    Panels are split at ``v_star +- 12 sqrt(sigma)`` so the Gaussian peak is
    resolved.  Returns ``(integral, degenerate)``; degenerate points have a
    zero-width interval (a point mass) and integral 0.  ``density`` replaces
    ``transition_density`` (used to inject a faulty kernel in checks).
    """
    density = transition_density if density is None else density
    v_star, v_field, u, alpha, rho_p = (np.atleast_1d(np.asarray(a, dtype=float)) for a in
                                        np.broadcast_arrays(v_star, v_field, u, alpha, rho_p))
    b = velocity_bounds(v_star, v_field, u, alpha, rho_p, kappa)
    v_m, v_M = np.atleast_1d(b.v_m), np.atleast_1d(b.v_M)
    _, sigma, _ = branch_weights(v_star, v_field, u, alpha, rho_p, kappa, sigma_floor)
    r = 12.0 * np.sqrt(sigma)
    cuts = np.sort(np.stack([v_m, np.clip(v_star - r, v_m, v_M), np.clip(v_star + r, v_m, v_M), v_M]), axis=0)
    xi, wi = np.polynomial.legendre.leggauss(10)
    k = max(1, n_points // 30)
    # node positions inside one unit panel split into k subpanels
    unit = ((np.arange(k)[:, None] + 0.5 * (xi[None, :] + 1.0)) / k).ravel()
    unit_w = np.tile(0.5 * wi / k, k)
    total = np.zeros(v_star.shape)
    for seg in range(3):
        a = cuts[seg][:, None]
        h = (cuts[seg + 1] - cuts[seg])[:, None]
        nodes = a + h * unit[None, :]
        vals = density(nodes, v_star[:, None], v_field[:, None], u[:, None], alpha[:, None], rho_p[:, None],
                       kappa, sigma_floor)
        total += (h * unit_w[None, :] * vals).sum(axis=1)
    return total, (v_M - v_m) <= 0.0


def _cell_index(p: float, grid: GridSpec) -> int:
    return min(max(int(p / grid.dv), 0), grid.n_v - 1)


def _fix_row_sum(row: np.ndarray) -> np.ndarray:
    # absorb the rounding into the last nonzero entry so the left-to-right sum is exactly 1.0
    nz = np.flatnonzero(row)
    if nz.size == 0:
        return row
    k = int(nz[-1])
    s = 0.0
    for value in row[:k]:
        s += value
    if s < 1.0:
        row[k] = 1.0 - s
    return row


def transition_row_discrete(v_star, v_field, u, alpha, rho_p, grid: GridSpec,
                            kappa: float = 0.05, sigma_floor: float = 1e-8, rule: str = "cell") -> np.ndarray:
    """Transition probabilities from ``v_star`` into each v-cell; the row sums to 1.

    ``rule="cell"`` integrates ``A`` exactly over each cell; ``rule="midpoint"``
    samples ``A`` at the cell centres and multiplies by ``dv``.  Either way the
    row is renormalised.  An interval that carries no sampled mass puts unit
    weight on the cell containing its midpoint.
    """
    b = velocity_bounds(v_star, v_field, u, alpha, rho_p, kappa)
    width = b.v_M - b.v_m
    row = np.zeros(grid.n_v)
    if width > 0:
        if rule == "midpoint":
            row = transition_density(grid.v, v_star, v_field, u, alpha, rho_p, kappa, sigma_floor) * grid.dv
        elif rule == "cell":
            w_gauss, sigma, power = (float(a) for a in branch_weights(v_star, v_field, u, alpha, rho_p,
                                                                        kappa, sigma_floor))
            edges = np.clip(grid.v_edges, b.v_m, b.v_M)
            root = np.sqrt(sigma)
            e = (edges - v_star) / root
            gauss = _erf_diff(e[:-1], e[1:]) / _erf_diff((b.v_m - v_star) / root, (b.v_M - v_star) / root)
            k = int(power) + 1
            poly = ((b.v_M - edges[:-1]) ** k - (b.v_M - edges[1:]) ** k) / width ** k
            row = w_gauss * gauss + (1.0 - w_gauss) * poly
        else:
            raise ValueError(f"unknown rule {rule!r}")
    total = row.sum()
    if not total > 0:
        row = np.zeros(grid.n_v)
        row[_cell_index(0.5 * (b.v_m + b.v_M), grid)] = 1.0
        return row
    return _fix_row_sum(row / total)


# ---------------------------------------------------------------------------
# long-range (mean-field) interactions


def accel_kernel_phi(x, x_field, v, v_field, u, alpha, ell_v, d_c):
    """Acceleration exerted on ``(x, v, u)`` by a vehicle at ``(x_field, v_field)`` ahead of it."""
    gap = v_field - v
    if abs(gap) > d_c or ell_v <= 0:
        return 0.0
    return alpha * u * (x_field - x) / ell_v * gap


def band_integrals(v, grid: GridSpec, d_c: float):
    """Overlap integrals of each v-cell with the band ``|v* - v| < d_c``.

    Returns ``(I0, I1, dI0, dI1)``, arrays of shape ``(len(v), n_v)`` with
    ``I0 = |cell ∩ band|``, ``I1 = int_{cell ∩ band} v* dv*`` and their exact
    derivatives with respect to ``v``.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))[:, None]
    left = grid.v_edges[None, :-1]
    right = grid.v_edges[None, 1:]
    top = v + d_c
    bottom = v - d_c
    a = np.maximum(bottom, left)
    b = np.minimum(top, right)
    inside = b > a
    I0 = np.where(inside, b - a, 0.0)
    I1 = np.where(inside, 0.5 * (b * b - a * a), 0.0)
    top_in = (top > left) & (top < right)
    bottom_in = (bottom > left) & (bottom < right)
    dI0 = top_in.astype(float) - bottom_in.astype(float)
    dI1 = np.where(top_in, top, 0.0) - np.where(bottom_in, bottom, 0.0)
    return I0, I1, dI0, dI1


def lookahead_profile(f: FieldLike, grid: GridSpec, params: ModelParams) -> np.ndarray:
    """``w[ix, j] = int_0^1 z* int f(x + ell_v z*, v_j, u*) du* dz*`` with nearest-cell x sampling."""
    values = as_array(f, grid)
    marginal = values.sum(axis=2) * grid.du
    ell = params.ell_v(grid)
    n_z = int(params.n_z)
    z = (np.arange(n_z) + 0.5) / n_z
    offsets = np.floor(0.5 + ell[:, None] * z[None, :] / grid.dx).astype(int)
    rows = (np.arange(grid.n_x)[:, None] + offsets) % grid.n_x
    w = np.zeros((grid.n_x, grid.n_v))
    for k in range(n_z):
        w += z[k] * marginal[rows[:, k]]
    return w / n_z


def mean_field_parts(f: FieldLike, grid: GridSpec, params: ModelParams, v=None):
    """``(F1, F2)`` per x-cell at velocities ``v`` (default: v-cell centres)."""
    v = grid.v if v is None else np.atleast_1d(np.asarray(v, dtype=float))
    w = lookahead_profile(f, grid, params)
    I0, I1, _, _ = band_integrals(v, grid, params.d_c)
    return w @ I1.T, w @ I0.T


def mean_field(f: FieldLike, grid: GridSpec, params: ModelParams) -> np.ndarray:
    """Mean-field acceleration ``F[f]`` on the whole grid, shape ``(n_x, n_v, n_u)``."""
    F1, F2 = mean_field_parts(f, grid, params)
    coef = params.alpha_field(grid) * params.ell_v(grid)
    drift = coef[:, None] * (F1 - grid.v[None, :] * F2)
    return drift[:, :, None] * grid.u[None, None, :]


def mean_field_at(f: FieldLike, grid: GridSpec, params: ModelParams, ix: int, v: float, u: float) -> float:
    F1, F2 = mean_field_parts(f, grid, params, [v])
    coef = params.alpha_field(grid)[ix] * params.ell_v(grid)[ix]
    return float(coef * u * (F1[ix, 0] - v * F2[ix, 0]))


def mean_field_force(f: FieldLike, grid: GridSpec, params: ModelParams, ix: int, iv: int, iu: int) -> float:
    return mean_field_at(f, grid, params, ix, float(grid.v[iv]), float(grid.u[iu]))


def mean_field_force_dv(f: FieldLike, grid: GridSpec, params: ModelParams, ix: int, iu: int, v: float) -> float:
    """``-alpha u ell_v F2``: the velocity derivative of ``F`` with the band held fixed.

    This drops the boundary terms coming from the v-dependence of the band and
    is exact only when the band covers all of [0, 1] (``d_c >= 1``).
    """
    _, F2 = mean_field_parts(f, grid, params, [v])
    coef = params.alpha_field(grid)[ix] * params.ell_v(grid)[ix]
    return float(-coef * grid.u[iu] * F2[ix, 0])


# ---------------------------------------------------------------------------
# external actions


def build_equilibrium(v_e, sigma_e: float, grid: GridSpec, target_mass: float) -> np.ndarray:
    """Equilibrium field ``f_e ∝ exp(-(v - v_e(x))^2 / sigma_e^2)``, uniform in u.

    The Gaussian is averaged over each v-cell (so a vanishing width collapses
    onto the cell containing ``v_e``) and the whole field is scaled to
    ``target_mass``.
    """
    if target_mass < 0:
        raise ValueError("target_mass must be >= 0")
    if sigma_e <= 0:
        raise ValueError("sigma_e must be > 0")
    v_e = np.broadcast_to(np.asarray(v_e, dtype=float), (grid.n_x,))
    if np.any(v_e < 0) or np.any(v_e > 1):
        raise ValueError("v_e must lie in [0, 1]")
    e = (grid.v_edges[None, :] - v_e[:, None]) / sigma_e
    profile = _erf_diff(e[:, :-1], e[:, 1:])
    f_e = np.repeat(profile[:, :, None], grid.n_u, axis=2)
    total = mass(f_e, grid)
    if target_mass == 0 or total == 0:
        return np.zeros(grid.shape)
    return f_e * (target_mass / total)


@dataclass
class ExternalAction:
    """Spatial intensity ``mu0(x)``, prescribed speed ``v_e(x)`` and the equilibrium field."""

    mu0: np.ndarray
    v_e: np.ndarray
    sigma_e: float
    f_e: np.ndarray

    def __post_init__(self):
        self.mu0 = np.asarray(self.mu0, dtype=float)
        self.v_e = np.asarray(self.v_e, dtype=float)
        self.f_e = np.asarray(self.f_e, dtype=float)
        if np.any(self.mu0 < 0):
            raise ValueError("mu0 must be nonnegative")

    @classmethod
    def build(cls, grid: GridSpec, mu0, v_e, sigma_e: float, target_mass: float) -> "ExternalAction":
        mu0 = np.broadcast_to(np.asarray(mu0, dtype=float), (grid.n_x,)).copy()
        v_e = np.broadcast_to(np.asarray(v_e, dtype=float), (grid.n_x,)).copy()
        return cls(mu0, v_e, sigma_e, build_equilibrium(v_e, sigma_e, grid, target_mass))

    @classmethod
    def none(cls, grid: GridSpec) -> "ExternalAction":
        return cls(np.zeros(grid.n_x), np.zeros(grid.n_x), 1.0, np.zeros(grid.shape))

    def rate(self, rho_p, gamma_mu: float) -> np.ndarray:
        return external_rate(rho_p, self.mu0, gamma_mu)


def macro_inputs(f: FieldLike, grid: GridSpec, params: ModelParams):
    """Density, perceived density, encounter rate and the saturation count for ``f``."""
    rho = density(f, grid)
    rho_p, n_sat = perceived_density_field(rho, grid, params)
    eta = encounter_rate(rho_p, params.eta0, params.gamma_eta)
    return rho, np.asarray(rho_p, dtype=float), np.asarray(eta, dtype=float), n_sat

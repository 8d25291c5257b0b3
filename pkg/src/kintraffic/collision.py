"""Short-range interaction operator ``J = gain - loss`` and the external relaxation.

All short-range interactions are local in x: candidate and field vehicles are
taken from the same x-cell.  For every x-cell and activity class the
transition tensor ``rows[a, b, c]`` holds the probability that a candidate in
v-cell ``a`` meeting a field vehicle in v-cell ``b`` ends in v-cell ``c``.
Each ``rows[a, b, :]`` sums to one, which makes ``J`` conserve mass per cell
and per activity class up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .core import Diagnostics, FieldLike, GridSpec, ModelParams, as_array
from .kernels import macro_inputs


@numba.njit(cache=True)
def _fix_sum(row, lo, hi):
    k = -1
    for c in range(lo, hi + 1):
        if row[c] != 0.0:
            k = c
    if k < 0:
        return
    s = 0.0
    for c in range(lo, k):
        s += row[c]
    if s < 1.0:
        row[k] = 1.0 - s


@numba.njit(cache=True)
def _transition_tensor(v, edges, au, rho_p, kappa, sigma_floor, cell_rule):
    n = v.shape[0]
    dv = edges[1] - edges[0]
    rows = np.zeros((n, n, n))
    P = au * (1.0 - rho_p)
    sig_acc = max(kappa * P, sigma_floor)
    sig_dec = max(kappa * (1.0 - P), sigma_floor)
    r_acc = math.sqrt(sig_acc)
    r_dec = math.sqrt(sig_dec)
    # erf((edge - v_a) / sqrt(sigma)) for both branches
    e_acc = np.empty((n, n + 1))
    e_dec = np.empty((n, n + 1))
    for a in range(n):
        for i in range(n + 1):
            e_acc[a, i] = math.erf((edges[i] - v[a]) / r_acc)
            e_dec[a, i] = math.erf((edges[i] - v[a]) / r_dec)
    for a in range(n):
        va = v[a]
        for b in range(n):
            vb = v[b]
            gap = abs(va - vb)
            spread = gap + math.exp(-gap)
            vm = max(0.0, min(va, vb) - kappa * (1.0 - au) * rho_p * spread)
            vM = min(1.0, max(va, vb) + kappa * au * (1.0 - rho_p) * spread)
            if vb >= va:
                wg = 1.0 - P
                root = r_acc
                power = 2
            else:
                wg = P
                root = r_dec
                power = 1
            width = vM - vm
            row = rows[a, b]
            lo = min(int(vm / dv), n - 1)
            hi = min(int(vM / dv), n - 1)
            if width > 0.0:
                em = math.erf((vm - va) / root)
                eM = math.erf((vM - va) / root)
                zg = eM - em
                if cell_rule:
                    wk = width * width * width if power == 2 else width * width
                    for c in range(lo, hi + 1):
                        left = vm if c == lo else edges[c]
                        right = vM if c == hi else edges[c + 1]
                        if right <= left:
                            continue
                        if vb >= va:
                            gl = em if c == lo else e_acc[a, c]
                            gr = eM if c == hi else e_acc[a, c + 1]
                        else:
                            gl = em if c == lo else e_dec[a, c]
                            gr = eM if c == hi else e_dec[a, c + 1]
                        dl = vM - left
                        dr = vM - right
                        if power == 2:
                            poly = (dl * dl * dl - dr * dr * dr) / wk
                        else:
                            poly = (dl * dl - dr * dr) / wk
                        row[c] = wg * (gr - gl) / zg + (1.0 - wg) * poly
                else:
                    zgauss = 0.5 * math.sqrt(math.pi) * root * zg
                    zpoly = width ** (power + 1) / (power + 1)
                    for c in range(lo, hi + 1):
                        vc = v[c]
                        if vc < vm or vc > vM:
                            continue
                        d = vc - va
                        val = wg * math.exp(-d * d / (root * root)) / zgauss
                        if wg != 1.0:
                            val += (1.0 - wg) * (vM - vc) ** power / zpoly
                        row[c] = val * dv
            total = 0.0
            for c in range(lo, hi + 1):
                total += row[c]
            if total > 0.0:
                for c in range(lo, hi + 1):
                    row[c] /= total
                _fix_sum(row, lo, hi)
            else:
                row[:] = 0.0
                row[min(int(0.5 * (vm + vM) / dv), n - 1)] = 1.0
    return rows


@dataclass
class CollisionWorkspace:
    """Cache of transition tensors keyed by ``(alpha*u, rho_p)``.

    Rows depend on the x-cell only through ``alpha*u`` and ``rho_p``, so
    homogeneous stretches of road share one tensor.  Entries are exact
    functions of their key; a cached tensor is bitwise the tensor that would be
    recomputed.
    """

    grid: GridSpec
    params: ModelParams
    max_entries: int = 64
    cache: dict = field(default_factory=dict)
    hits: int = 0
    misses: int = 0

    def tensor(self, au: float, rho_p: float) -> np.ndarray:
        key = (float(au), float(rho_p))
        rows = self.cache.get(key)
        if rows is not None:
            self.hits += 1
            return rows
        self.misses += 1
        rows = transition_tensor(self.grid, self.params, au, rho_p)
        if len(self.cache) >= self.max_entries:
            self.cache.pop(next(iter(self.cache)))
        self.cache[key] = rows
        return rows


def transition_tensor(grid: GridSpec, params: ModelParams, au: float, rho_p: float) -> np.ndarray:
    """``rows[a, b, c]``: probability of ``v_a -> v_c`` after meeting a vehicle at ``v_b``."""
    return _transition_tensor(grid.v, grid.v_edges, float(au), float(rho_p), float(params.kappa),
                              float(params.sigma_floor), params.row_rule == "cell")


def _field_inputs(f: FieldLike, grid: GridSpec, params: ModelParams, diag: Diagnostics | None):
    values = as_array(f, grid)
    rho, rho_p, eta, n_sat = macro_inputs(values, grid, params)
    if diag is not None:
        diag.saturation_events += n_sat
        alpha = params.alpha_field(grid)
        P = alpha[:, None] * grid.u[None, :] * (1.0 - rho_p[:, None])
        hits = (params.kappa * P < params.sigma_floor) | (params.kappa * (1.0 - P) < params.sigma_floor)
        diag.sigma_floor_hits += int(np.count_nonzero(hits))
    return values, rho, rho_p, eta


def gain_field(f: FieldLike, grid: GridSpec, params: ModelParams, workspace: CollisionWorkspace | None = None,
               diag: Diagnostics | None = None) -> np.ndarray:
    """Gain term ``eta sum_{a,b,u*} rows[a,b,c] f(a,u) f(b,u*) dv du`` on the whole grid."""
    values, rho, rho_p, eta = _field_inputs(f, grid, params, diag)
    ws = workspace if workspace is not None else CollisionWorkspace(grid, params)
    alpha = params.alpha_field(grid)
    field_marginal = values.sum(axis=2) * grid.du
    out = np.zeros(grid.shape)
    n_v = grid.n_v
    for ix in range(grid.n_x):
        if rho[ix] == 0.0 or eta[ix] == 0.0:
            continue
        m = field_marginal[ix]
        for iu in range(grid.n_u):
            cand = values[ix, :, iu]
            if not cand.any():
                continue
            rows = ws.tensor(alpha[ix] * grid.u[iu], rho_p[ix])
            pair = np.outer(cand, m).reshape(n_v * n_v)
            out[ix, :, iu] = eta[ix] * grid.dv * (pair @ rows.reshape(n_v * n_v, n_v))
    return out


def loss_field(f: FieldLike, grid: GridSpec, params: ModelParams, diag: Diagnostics | None = None) -> np.ndarray:
    """Loss term ``f eta rho``: candidates leave their state at the encounter rate."""
    values, rho, _, eta = _field_inputs(f, grid, params, diag)
    return values * (eta * rho)[:, None, None]


def collision_J(f: FieldLike, grid: GridSpec, params: ModelParams, workspace: CollisionWorkspace | None = None,
                diag: Diagnostics | None = None) -> np.ndarray:
    values = as_array(f, grid)
    return gain_field(values, grid, params, workspace, diag) - loss_field(values, grid, params)


def gain(f: FieldLike, grid: GridSpec, params: ModelParams, ix: int, iv: int, iu: int) -> float:
    values = as_array(f, grid)
    one = GridSpec(1, grid.n_v, grid.n_u, grid.u_nodes)
    cell_params = params.replace(alpha=float(params.alpha_field(grid)[ix]))
    return float(gain_field(values[ix:ix + 1], one, cell_params)[0, iv, iu])


def loss(f: FieldLike, grid: GridSpec, params: ModelParams, ix: int, iv: int, iu: int) -> float:
    values = as_array(f, grid)
    return float(loss_field(values, grid, params)[ix, iv, iu])


def positivity_dt(f: FieldLike, grid: GridSpec, params: ModelParams) -> float:
    """Largest explicit step for which ``f + dt J[f]`` stays nonnegative (loss bound)."""
    _, rho, _, eta = _field_inputs(f, grid, params, None)
    worst = float(np.max(eta * rho)) if rho.size else 0.0
    return math.inf if worst <= 0 else 1.0 / worst


def relaxation_T(f: FieldLike, f_e: np.ndarray, mu, dt: float) -> np.ndarray:
    """Exact update of ``df/dt = mu (f_e - f)`` over ``dt`` with ``mu`` frozen per x-cell."""
    values = as_array(f)
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ValueError("relaxation rate mu must be nonnegative")
    if mu.ndim == 1:
        mu = mu[:, None, None]
    decay = np.exp(-mu * dt)
    return np.where(decay == 1.0, values, f_e + (values - f_e) * decay)

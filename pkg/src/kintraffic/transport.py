"""Linear transport ``f_t + v f_x + (F[h] f)_v = g`` with the force frozen from ``h``.

Two realisations of one transport step are provided.

``scheme="split"`` (default) composes an x-shift along each velocity row with
a conservative remap in v: ``X(dt/2) V(dt) X(dt/2)``.  The x-shift is a
constant shift per row (cubic or linear Lagrange interpolation, periodic) and
the v-remap integrates a limited piecewise-linear reconstruction between the
feet of the backtraced cell edges.  Mass is conserved up to rounding and the
v-remap never produces negative values.

``scheme="characteristic"`` follows the full backward characteristic in
``(x, v)``, weights by the flow Jacobian and interpolates at the foot.  It is
the direct discrete reading of the representation formula and is kept as a
cross-check; it is not exactly conservative.

Backward characteristics that leave ``v ∈ [0, 1]`` are not clamped: their
foot lies where ``f`` vanishes, so they contribute zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Diagnostics, FieldLike, GridSpec, ModelParams, as_array
from .kernels import lookahead_profile


class CFLError(ValueError):
    """The requested step violates the transport step-size guard."""


@dataclass(frozen=True)
class FrozenForce:
    """Mean-field acceleration of a fixed field ``h``, evaluable at any ``(x, v, u)``.

    ``profile[ix, j]`` is ``alpha ell_v`` times the look-ahead profile of
    ``h``, piecewise constant in ``v*``.  With ``C0(y) = int_0^y W`` and
    ``C1(y) = int_0^y v* W`` the band sums are ``G2 = C0(v+d_c) - C0(v-d_c)``
    and ``G1 = C1(v+d_c) - C1(v-d_c)``, and ``F = u (G1 - v G2)``.  Between
    x-cell centres the profile is interpolated linearly.
    """

    grid: GridSpec
    profile: np.ndarray
    d_c: float
    valid_time: tuple | None = None
    _cum0: np.ndarray = field(init=False, repr=False, compare=False)
    _cum1: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        W = np.asarray(self.profile, dtype=float)
        if W.shape != (self.grid.n_x, self.grid.n_v):
            raise ValueError(f"profile shape {W.shape} does not match grid")
        if not np.all(np.isfinite(W)):
            raise ValueError("force profile must be finite")
        e = self.grid.v_edges
        zero = np.zeros((W.shape[0], 1))
        object.__setattr__(self, "profile", W)
        object.__setattr__(self, "_cum0", np.concatenate([zero, np.cumsum(W * np.diff(e), axis=1)], axis=1))
        object.__setattr__(self, "_cum1", np.concatenate([zero, np.cumsum(W * 0.5 * np.diff(e * e), axis=1)], axis=1))

    @classmethod
    def from_field(cls, h: FieldLike, grid: GridSpec, params: ModelParams, valid_time=None) -> "FrozenForce":
        coef = params.alpha_field(grid) * params.ell_v(grid)
        w = lookahead_profile(h, grid, params)
        return cls(grid, coef[:, None] * w, float(params.d_c), valid_time)

    @classmethod
    def zero(cls, grid: GridSpec, d_c: float = 0.2) -> "FrozenForce":
        return cls(grid, np.zeros((grid.n_x, grid.n_v)), d_c)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.profile)

    def _cumulative(self, rows, y):
        g = self.grid
        yc = np.clip(y, 0.0, 1.0)
        j = np.minimum((yc / g.dv).astype(int), g.n_v - 1)
        e = j * g.dv
        w = self.profile[rows, j]
        c0 = self._cum0[rows, j] + w * (yc - e)
        c1 = self._cum1[rows, j] + w * 0.5 * (yc * yc - e * e)
        density = np.where((y > 0.0) & (y < 1.0), w, 0.0)
        return c0, c1, density

    def _cell_parts(self, rows, v):
        lo0, lo1, wlo = self._cumulative(rows, v - self.d_c)
        hi0, hi1, whi = self._cumulative(rows, v + self.d_c)
        G1, G2 = hi1 - lo1, hi0 - lo0
        dG1 = (v + self.d_c) * whi - (v - self.d_c) * wlo
        dG2 = whi - wlo
        return G1, G2, dG1, dG2

    def _all_parts(self, x, v, cells):
        v = np.asarray(v, dtype=float).ravel()
        if cells is not None:
            return self._cell_parts(np.asarray(cells).ravel(), v)
        p = np.asarray(x, dtype=float).ravel() / self.grid.dx - 0.5
        i0 = np.floor(p)
        t = p - i0
        i0 = i0.astype(int) % self.grid.n_x
        i1 = (i0 + 1) % self.grid.n_x
        a = self._cell_parts(i0, v)
        b = self._cell_parts(i1, v)
        return tuple((1.0 - t) * pa + t * pb for pa, pb in zip(a, b))

    def parts(self, x, v, cells=None):
        """``(G1, G2) = (alpha ell_v F1, alpha ell_v F2)`` at the given points."""
        G1, G2, _, _ = self._all_parts(x, v, cells)
        return G1, G2

    def accel(self, x, v, u, cells=None) -> np.ndarray:
        shape = np.shape(v)
        G1, G2, _, _ = self._all_parts(x, v, cells)
        vf = np.asarray(v, dtype=float).ravel()
        return (np.asarray(u, dtype=float).ravel() * (G1 - vf * G2)).reshape(shape)

    def divergence(self, x, v, u, cells=None) -> np.ndarray:
        """Exact ``dF/dv`` of the frozen field, band boundary terms included."""
        shape = np.shape(v)
        vf = np.asarray(v, dtype=float).ravel()
        _, G2, dG1, dG2 = self._all_parts(x, v, cells)
        return (np.asarray(u, dtype=float).ravel() * (dG1 - G2 - vf * dG2)).reshape(shape)

    def band_fixed_divergence(self, x, v, u, cells=None) -> np.ndarray:
        """``-alpha u ell_v F2``: the derivative with the band held fixed."""
        shape = np.shape(v)
        _, G2, _, _ = self._all_parts(x, v, cells)
        return (-np.asarray(u, dtype=float).ravel() * G2).reshape(shape)

    def max_abs(self) -> float:
        """Largest ``|F|`` over x-cell centres and v-cell edges at ``u = u_max``."""
        g = self.grid
        if self.is_zero:
            return 0.0
        cells = np.repeat(np.arange(g.n_x), g.n_v + 1)
        v = np.tile(g.v_edges, g.n_x)
        return float(np.abs(self.accel(None, v, np.full(v.size, g.u[-1]), cells)).max())


@dataclass(frozen=True)
class CharacteristicState:
    x: np.ndarray
    v: np.ndarray
    u: np.ndarray

    def outside(self, tol: float = 1e-8) -> np.ndarray:
        return (self.v < -tol) | (self.v > 1.0 + tol)


def _heun(x, v, u, duration, force, n_sub, backward, cells=None, clamp_tol=None, counter=None):
    h = (-duration if backward else duration) / n_sub
    path = [(x, v)]
    for _ in range(n_sub):
        a1 = force.accel(x, v, u, cells)
        xp = x + h * v
        vp = v + h * a1
        a2 = force.accel(xp, vp, u, cells)
        x = x + 0.5 * h * (v + vp)
        v = v + 0.5 * h * (a1 + a2)
        if clamp_tol is not None:
            out = (v < -clamp_tol) | (v > 1.0 + clamp_tol)
            if np.any(out):
                counter[0] += int(np.count_nonzero(out))
                v = np.clip(v, 0.0, 1.0)
        path.append((x, v))
    return path


def backtrace(x, v, u, dt: float, force: FrozenForce, n_sub: int = 4, return_path: bool = False):
    """Follow ``X' = V, V' = F[h], U' = 0`` backwards over ``dt`` with Heun substeps.

    ``X`` is wrapped onto ``[0, 1)``; ``V`` is returned unclamped.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if n_sub < 4:
        raise ValueError("use at least 4 substeps")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    u = np.broadcast_to(np.asarray(u, dtype=float), v.shape)
    path = _heun(x, v, u, dt, force, n_sub, backward=True)
    xe, ve = path[-1]
    state = CharacteristicState(np.mod(xe, 1.0), ve, u)
    return (state, path) if return_path else state


def forward_trace(x, v, u, duration: float, force: FrozenForce, n_sub: int = 64, clamp_tol: float = 1e-8):
    """Integrate characteristics forward; velocities leaving ``[-tol, 1+tol]`` are clamped and counted.

    Returns ``(state, n_clamped)``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    u = np.broadcast_to(np.asarray(u, dtype=float), v.shape)
    counter = [0]
    path = _heun(x, v, u, duration, force, n_sub, backward=False, clamp_tol=clamp_tol, counter=counter)
    xe, ve = path[-1]
    return CharacteristicState(np.mod(xe, 1.0), ve, u), counter[0]


def _jacobian_from_divs(divs, h):
    acc = np.zeros_like(divs[0])
    out = [np.ones_like(divs[0])]
    for k in range(1, len(divs)):
        acc = acc + 0.5 * h * (divs[k - 1] + divs[k])
        out.append(np.exp(-acc))
    return out


def jacobian_weight(path, u, h: float, force: FrozenForce, divergence: str = "exact") -> list:
    """``J(s, t) = exp(-int_s^t dF/dv dtau)`` at every node of a backward path.

    ``path[k]`` is the state at ``s = t - k h`` as returned by ``backtrace``;
    entry ``k`` of the result is ``J(t - k h, t)``, so entry 0 is exactly 1.
    The integral uses the trapezoid rule on the substep nodes.
    ``divergence="band_fixed"`` uses ``-alpha u ell_v F2`` instead of the exact
    derivative of the discrete force.
    """
    if divergence not in ("exact", "band_fixed"):
        raise ValueError(f"unknown divergence {divergence!r}")
    div_fn = force.divergence if divergence == "exact" else force.band_fixed_divergence
    return _jacobian_from_divs([div_fn(x, v, u) for x, v in path], abs(h))


# ---------------------------------------------------------------------------
# interpolation helpers


def _lagrange_weights(t, order):
    if order == 1:
        return (0, (1.0 - t, t))
    if order == 3:
        return (-1, (-t * (t - 1.0) * (t - 2.0) / 6.0,
                     (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
                     -(t + 1.0) * t * (t - 2.0) / 2.0,
                     (t + 1.0) * t * (t - 1.0) / 6.0))
    raise ValueError("x_order must be 1 or 3")


def shift_rows_x(values: np.ndarray, grid: GridSpec, tau: float, order: int = 3) -> np.ndarray:
    """Free streaming ``f(x - v tau)`` row by row on the periodic x-grid.

    Integer-cell shifts are exact: the interpolation weights are then exactly
    one and zero.
    """
    s = grid.v * tau / grid.dx
    k = np.floor(s)
    t = 1.0 - (s - k)
    first, weights = _lagrange_weights(t, order)
    base = np.arange(grid.n_x)[:, None] - k.astype(int)[None, :] - 1
    out = np.zeros_like(values)
    for m, w in enumerate(weights, start=first):
        idx = (base + m) % grid.n_x
        out += w[None, :, None] * np.take_along_axis(values, idx[:, :, None], axis=0)
    return out


def _mc_slopes(f: np.ndarray, dv: float, axis: int = 1) -> np.ndarray:
    pad = [(0, 0)] * f.ndim
    pad[axis] = (1, 1)
    g = np.pad(f, pad)
    left = np.take(g, range(0, f.shape[axis]), axis=axis)
    mid = f
    right = np.take(g, range(2, f.shape[axis] + 2), axis=axis)
    dl = (mid - left) / dv
    dr = (right - mid) / dv
    dc = 0.5 * (dl + dr)
    same = (dl * dr) > 0
    mag = np.minimum(np.minimum(2.0 * np.abs(dl), 2.0 * np.abs(dr)), np.abs(dc))
    return np.where(same, np.sign(dc) * mag, 0.0)


def remap_v(values: np.ndarray, grid: GridSpec, feet: np.ndarray) -> np.ndarray:
    """Cell averages of the reconstruction of ``values`` between the edge feet.

    ``feet[ix, e, iu]`` is the backtraced position of v-edge ``e``; feet are
    expected to be nondecreasing in ``e``.  ``values`` is extended by zero
    outside [0, 1].
    """
    dv = grid.dv
    slopes = _mc_slopes(values, dv, axis=1)
    cum = np.concatenate([np.zeros((grid.n_x, 1, grid.n_u)), np.cumsum(values * dv, axis=1)], axis=1)
    a = np.clip(feet, 0.0, 1.0)
    j = np.minimum((a / dv).astype(int), grid.n_v - 1)
    fj = np.take_along_axis(values, j, axis=1)
    sj = np.take_along_axis(slopes, j, axis=1)
    left = j * dv
    centre = left + 0.5 * dv
    C = (np.take_along_axis(cum, j, axis=1) + fj * (a - left)
         + 0.5 * sj * ((a - centre) ** 2 - 0.25 * dv * dv))
    C = np.where(feet >= 1.0, cum[:, -1:, :], C)
    C = np.where(feet <= 0.0, 0.0, C)
    return np.diff(C, axis=1) / dv


def _v_step(values, grid, force, tau, n_sub):
    if force.is_zero:
        return values.copy()
    nx, nv, nu = grid.n_x, grid.n_v + 1, grid.n_u
    cells = np.repeat(np.arange(nx), nv * nu)
    v0 = np.tile(np.repeat(grid.v_edges, nu), nx)
    u = np.tile(grid.u, nx * nv)
    path = _heun(np.zeros_like(v0), v0, u, tau, force, n_sub, backward=True, cells=cells)
    feet = path[-1][1].reshape(nx, nv, nu)
    feet = np.maximum.accumulate(feet, axis=1)
    return remap_v(values, grid, feet)


def _split(values, grid, force, tau, x_order, n_sub):
    half = shift_rows_x(values, grid, 0.5 * tau, x_order)
    mid = _v_step(half, grid, force, tau, n_sub)
    return shift_rows_x(mid, grid, 0.5 * tau, x_order)


def interpolate_xv(values: np.ndarray, grid: GridSpec, x, v, iu, x_order: int = 3) -> np.ndarray:
    """Interpolate cell values at points ``(x, v)`` in activity class ``iu``.

    Periodic Lagrange interpolation in x, linear in v with constant extension
    up to the walls and zero beyond ``[0, 1]``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    iu = np.asarray(iu, dtype=int)
    px = np.mod(x, 1.0) / grid.dx - 0.5
    jx = np.floor(px)
    tx = px - jx
    jx = jx.astype(int)
    pv = v / grid.dv - 0.5
    jv = np.floor(pv)
    tv = pv - jv
    jv = jv.astype(int)
    lo = np.clip(jv, 0, grid.n_v - 1)
    hi = np.clip(jv + 1, 0, grid.n_v - 1)
    first, wx = _lagrange_weights(tx, x_order)

    def along_x(jrow):
        acc = np.zeros(x.shape)
        for m, w in enumerate(wx, start=first):
            acc += w * values[(jx + m) % grid.n_x, jrow, iu]
        return acc

    out = (1.0 - tv) * along_x(lo) + tv * along_x(hi)
    return np.where((v < 0.0) | (v > 1.0), 0.0, out)


def _characteristic(values, grid, force, dt, source, x_order, n_sub, divergence, diag):
    ix, iv, iu = np.meshgrid(np.arange(grid.n_x), np.arange(grid.n_v), np.arange(grid.n_u), indexing="ij")
    x0 = grid.x[ix].ravel()
    v0 = grid.v[iv].ravel()
    u = grid.u[iu].ravel()
    iu = iu.ravel()
    path = _heun(x0, v0, u, dt, force, n_sub, backward=True)
    J = jacobian_weight(path, u, dt / n_sub, force, divergence)
    xf, vf = path[-1]
    if diag is not None:
        diag.outflow_feet += int(np.count_nonzero((vf < 0.0) | (vf > 1.0)))
    out = J[-1] * interpolate_xv(values, grid, xf, vf, iu, x_order)
    if source is not None:
        k = n_sub // 2
        xm, vm = path[k]
        out = out + dt * J[k] * interpolate_xv(source, grid, xm, vm, iu, x_order)
    return out.reshape(grid.shape)


def cfl_limit(grid: GridSpec, force: FrozenForce) -> float:
    """Largest ``dt`` allowed by ``dt <= dx`` (unit maximum speed) and ``dt max|F| <= dv``."""
    fmax = force.max_abs()
    return min(grid.dx, grid.dv / fmax if fmax > 0 else np.inf)


def transport_step(f: FieldLike, grid: GridSpec, force: FrozenForce, dt: float, source=None,
                   scheme: str = "split", x_order: int = 3, n_sub: int = 4, divergence: str = "exact",
                   diag: Diagnostics | None = None, check_cfl: bool = True) -> np.ndarray:
    """Advance ``f`` by ``dt`` under the frozen force, adding the source ``g`` if given.

    With a source the midpoint rule is used along characteristics:
    ``f_new = T(dt) f + dt T(dt/2) g``.  Negative values (possible only
    through the source or cubic x-interpolation) are set to zero and the
    removed mass is added to ``diag.floored_mass``.
    """
    values = as_array(f, grid)
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if check_cfl:
        limit = cfl_limit(grid, force)
        if dt > limit * (1.0 + 1e-12):
            raise CFLError(f"dt={dt:.6g} exceeds the transport guard {limit:.6g}; use a smaller step")
    src = None if source is None else as_array(source, grid)
    if scheme == "split":
        out = _split(values, grid, force, dt, x_order, n_sub)
        if src is not None:
            out = out + dt * _split(src, grid, force, 0.5 * dt, x_order, n_sub)
    elif scheme == "characteristic":
        out = _characteristic(values, grid, force, dt, src, x_order, n_sub, divergence, diag)
    else:
        raise ValueError(f"unknown transport scheme {scheme!r}")
    negative = out < 0
    if np.any(negative):
        if diag is not None:
            diag.floored_mass += float(-out[negative].sum() * grid.cell_volume)
        out = np.where(negative, 0.0, out)
    return out

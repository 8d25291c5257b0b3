import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_field
from kintraffic.core import Diagnostics, GridSpec, ModelParams, mass, shift_x
from kintraffic.kernels import mean_field
from kintraffic.transport import (CFLError, FrozenForce, backtrace, cfl_limit, forward_trace, jacobian_weight,
                                  remap_v, shift_rows_x, transport_step)


class ConstantForce:
    """Stand-in force with constant acceleration and divergence."""

    def __init__(self, a, div=0.0):
        self.a, self.div = a, div

    def accel(self, x, v, u, cells=None):
        return np.full(np.shape(v), self.a)

    def divergence(self, x, v, u, cells=None):
        return np.full(np.shape(v), self.div)

    band_fixed_divergence = divergence


class TestBacktrace:
    def test_free_streaming(self):
        g = GridSpec(8, 8)
        s = backtrace(np.array([0.1, 0.9]), np.array([0.3, 0.5]), 1.0, 0.5, FrozenForce.zero(g))
        assert np.allclose(s.x, [np.mod(0.1 - 0.15, 1), 0.65], atol=1e-15)
        assert np.array_equal(s.v, [0.3, 0.5])

    def test_rest_is_fixed(self):
        s = backtrace(np.array([0.4]), np.array([0.0]), 1.0, 0.3, FrozenForce.zero(GridSpec(4, 4)))
        assert s.x[0] == 0.4 and s.v[0] == 0.0

    def test_constant_force_closed_form(self):
        a, dt, x0, v0 = 0.3, 0.4, 0.5, 0.6
        s = backtrace(np.array([x0]), np.array([v0]), 1.0, dt, ConstantForce(a))
        assert s.v[0] == pytest.approx(v0 - a * dt, abs=1e-15)
        assert s.x[0] == pytest.approx(x0 - v0 * dt + 0.5 * a * dt * dt, abs=1e-15)

    def test_velocity_left_unclamped(self):
        s = backtrace(np.array([0.5]), np.array([0.05]), 1.0, 0.5, ConstantForce(0.4))
        assert s.v[0] < 0

    def test_argument_checks(self):
        f = FrozenForce.zero(GridSpec(4, 4))
        with pytest.raises(ValueError):
            backtrace(0.1, 0.1, 1.0, 0.0, f)
        with pytest.raises(ValueError):
            backtrace(0.1, 0.1, 1.0, 0.1, f, n_sub=2)


class TestJacobian:
    def test_zero_force(self):
        _, path = backtrace(np.array([0.2]), np.array([0.4]), 1.0, 0.5, FrozenForce.zero(GridSpec(4, 4)),
                            return_path=True)
        assert all(np.all(j == 1.0) for j in jacobian_weight(path, 1.0, 0.125, FrozenForce.zero(GridSpec(4, 4))))

    def test_constant_divergence(self):
        force = ConstantForce(0.0, div=0.7)
        _, path = backtrace(np.array([0.2]), np.array([0.4]), 1.0, 0.8, force, n_sub=8, return_path=True)
        J = jacobian_weight(path, 1.0, 0.1, force)
        assert J[0][0] == 1.0
        for k, j in enumerate(J):
            assert j[0] == pytest.approx(np.exp(-0.7 * 0.1 * k), rel=1e-14)


class TestFrozenForce:
    def test_matches_mean_field(self, rng):
        g = GridSpec(8, 12, 2)
        p = ModelParams(alpha=0.8)
        f = random_field(g, rng)
        force = FrozenForce.from_field(f, g, p)
        for ix in (0, 3, 7):
            for iu in range(g.n_u):
                ref = mean_field(f, g, p)[ix, :, iu]
                got = force.accel(np.full(g.n_v, g.x[ix]), g.v, np.full(g.n_v, g.u[iu]))
                assert np.allclose(got, ref, atol=1e-14)

    def test_divergence_is_derivative(self, rng):
        g = GridSpec(6, 10, 1)
        force = FrozenForce.from_field(random_field(g, rng), g, ModelParams())
        x = np.full(5, g.x[2])
        # band edges v +- d_c must avoid the cell edges, where the force has kinks
        v = np.array([0.13, 0.27, 0.44, 0.61, 0.87])
        h = 1e-6
        fd = (force.accel(x, v + h, 1.0) - force.accel(x, v - h, 1.0)) / (2 * h)
        assert np.allclose(force.divergence(x, v, 1.0), fd, atol=1e-7)

    def test_band_fixed_divergence_exact_for_full_band(self, rng):
        g = GridSpec(6, 10, 2)
        full = FrozenForce.from_field(random_field(g, rng), g, ModelParams(d_c=1.0))
        x, v, u = np.full(7, g.x[1]), np.linspace(0.05, 0.95, 7), np.full(7, g.u[1])
        assert np.allclose(full.divergence(x, v, u), full.band_fixed_divergence(x, v, u), atol=1e-15)
        narrow = FrozenForce.from_field(random_field(g, rng), g, ModelParams(d_c=0.2))
        assert not np.allclose(narrow.divergence(x, v, u), narrow.band_fixed_divergence(x, v, u), atol=1e-6)
        with pytest.raises(ValueError):
            jacobian_weight([(x, v)], u, 0.1, full, divergence="fd")

    def test_forward_trace_support(self, rng):
        g = GridSpec(8, 16, 2)
        force = FrozenForce.from_field(random_field(g, rng), g, ModelParams())
        state, clamps = forward_trace(rng.random(2000), rng.random(2000), rng.choice(g.u, 2000), 1.0, force)
        assert clamps == 0 and not state.outside().any()


class TestStep:
    def test_integer_shift_is_exact(self, rng):
        g = GridSpec(16, 16, 1)
        f = rng.random(g.shape)
        # tau = 2 moves row j by 2j + 1 cells
        out = shift_rows_x(f, g, 2.0)
        for j in range(g.n_v):
            assert np.array_equal(out[:, j], np.roll(f[:, j], 2 * j + 1, axis=0))
        step = transport_step(f, g, FrozenForce.zero(g), 4.0, check_cfl=False)
        for j in range(g.n_v):
            assert np.array_equal(step[:, j], np.roll(f[:, j], 4 * j + 2, axis=0))

    def test_zero_field(self):
        g = GridSpec(8, 8, 2)
        assert np.all(transport_step(g.zeros(), g, FrozenForce.zero(g), g.dx) == 0)

    def test_cfl_guard(self, rng):
        g = GridSpec(8, 8)
        force = FrozenForce.from_field(random_field(g, rng), g, ModelParams())
        limit = cfl_limit(g, force)
        assert limit <= g.dx
        with pytest.raises(CFLError):
            transport_step(g.zeros(), g, force, 1.01 * limit)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), scheme=st.sampled_from(["split", "characteristic"]))
    def test_mass_and_sign(self, seed, scheme):
        rng = np.random.default_rng(seed)
        g = GridSpec(16, 16, 2)
        f = random_field(g, rng)
        force = FrozenForce.from_field(f, g, ModelParams())
        diag = Diagnostics()
        out = transport_step(f, g, force, 0.5 * cfl_limit(g, force), scheme=scheme, diag=diag)
        assert np.all(out >= 0)
        # flooring adds exactly the recorded mass
        drift = abs(mass(out, g) - diag.floored_mass - mass(f, g)) / mass(f, g)
        assert drift <= (1e-13 if scheme == "split" else 1e-4)

    def test_shift_equivariance(self, rng):
        g = GridSpec(16, 12, 2)
        p = ModelParams()
        f = random_field(g, rng)
        dt = 0.5 * cfl_limit(g, FrozenForce.from_field(f, g, p))
        a = shift_x(transport_step(f, g, FrozenForce.from_field(f, g, p), dt), 5)
        fs = shift_x(f, 5)
        b = transport_step(fs, g, FrozenForce.from_field(fs, g, p), dt)
        assert np.max(np.abs(a - b)) <= 1e-14

    def test_remap_identity_and_mass(self, rng):
        g = GridSpec(3, 10, 1)
        f = rng.random(g.shape)
        feet = np.broadcast_to(g.v_edges[None, :, None], (3, 11, 1))
        assert np.allclose(remap_v(f, g, feet), f, atol=1e-15)
        moved = np.clip(feet + 0.03, 0.0, 1.0)
        moved = np.maximum.accumulate(moved, axis=1)
        moved[:, 0], moved[:, -1] = 0.0, 1.0
        assert np.allclose(remap_v(f, g, moved).sum(axis=1), f.sum(axis=1), atol=1e-13)

    def test_unknown_scheme(self):
        g = GridSpec(4, 4)
        with pytest.raises(ValueError):
            transport_step(g.zeros(), g, FrozenForce.zero(g), 0.1, scheme="spectral")

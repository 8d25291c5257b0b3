import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kintraffic.core import (DistributionField, GridError, GridSpec, ModelParams, density, l1_distance, linf_norm,
                             mass, moments, shift_x)


def test_grid_geometry():
    g = GridSpec(4, 5, 2)
    assert g.shape == (4, 5, 2)
    assert np.allclose(g.x, [0.125, 0.375, 0.625, 0.875])
    assert np.all((g.v > 0) & (g.v < 1))
    assert g.v_edges[0] == 0.0 and g.v_edges[-1] == 1.0
    assert g.cell_volume == pytest.approx(1 / 40)


@pytest.mark.parametrize("bad", [(0, 4, 1), (4, -1, 1), (4, 4, 1.5)])
def test_grid_rejects_bad_counts(bad):
    with pytest.raises(ValueError):
        GridSpec(*bad)


def test_u_nodes():
    g = GridSpec(2, 4, 1, (1.0,))
    assert g.u.tolist() == [1.0]
    with pytest.raises(ValueError):
        GridSpec(2, 4, 2, (1.0,))


def test_distribution_field_validation():
    with pytest.raises(ValueError):
        DistributionField(-np.ones((2, 2, 1)))
    with pytest.raises(ValueError):
        DistributionField(np.full((2, 2, 1), np.nan))
    with pytest.raises(GridError):
        DistributionField(np.ones((2, 2)))
    arr = np.ones((2, 3, 1))
    f = DistributionField(arr, t=0.5)
    arr[0, 0, 0] = 7.0
    assert f.values[0, 0, 0] == 1.0
    assert not f.values.flags.writeable
    assert f.grid == GridSpec(2, 3, 1)


def test_density_examples():
    g = GridSpec(3, 8, 2)
    assert np.all(density(g.zeros(), g) == 0)
    assert np.allclose(density(np.ones(g.shape), g), 1.0, atol=1e-15)
    f = np.broadcast_to(2 * g.v[None, :, None], g.shape)
    # midpoint rule integrates a linear function exactly
    assert np.allclose(density(f, g), 1.0, atol=1e-15)


def test_density_shape_error():
    with pytest.raises(GridError):
        density(np.ones((2, 2, 2)), GridSpec(3, 2, 2))


def test_moments_examples():
    g = GridSpec(2, 10, 1)
    m = moments(np.ones(g.shape), g)
    assert np.allclose(m.mean_v, 0.5) and np.allclose(m.flux, 0.5)
    f = g.zeros()
    f[:, -1, :] = 3.0
    m = moments(f, g)
    assert np.allclose(m.mean_v, g.v[-1])
    m0 = moments(g.zeros(), g)
    assert np.all(m0.mean_v == 0) and np.all(m0.flux == 0)


def test_norms():
    g = GridSpec(3, 4, 2)
    f = np.random.default_rng(0).random(g.shape)
    assert l1_distance(f, f, g) == 0.0
    assert l1_distance(np.ones(g.shape), g.zeros(), g) == pytest.approx(1.0, abs=1e-15)
    assert linf_norm(np.full(g.shape, -2.5)) == 2.5


def test_mass_is_sum_of_density():
    g = GridSpec(5, 6, 3)
    f = np.random.default_rng(1).random(g.shape)
    assert mass(f, g) == float(density(f, g).sum() * g.dx)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**16))
def test_density_is_linear(a, b, seed):
    g = GridSpec(4, 6, 2)
    rng = np.random.default_rng(seed)
    f1, f2 = rng.random(g.shape), rng.random(g.shape)
    lhs = density(a * f1 + b * f2, g)
    rhs = a * density(f1, g) + b * density(f2, g)
    assert np.allclose(lhs, rhs, atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(k=st.integers(-10, 10), seed=st.integers(0, 2**16))
def test_shift_equivariance_of_moments(k, seed):
    g = GridSpec(7, 5, 2)
    f = np.random.default_rng(seed).random(g.shape)
    m, ms = moments(f, g), moments(shift_x(f, k), g)
    assert np.array_equal(np.roll(m.rho, k), ms.rho)
    assert np.array_equal(np.roll(m.flux, k), ms.flux)


def test_model_params_validation():
    ModelParams(eta0=0.0)
    for bad in (dict(alpha=1.5), dict(alpha=[0.5, -0.1]), dict(d_c=0.0), dict(kappa=0.0), dict(sigma_floor=0),
                dict(perceived="cubic"), dict(row_rule="x"), dict(n_z=0), dict(L=2.0)):
        with pytest.raises(ValueError):
            ModelParams(**bad)
    p = ModelParams(alpha=np.array([0.2, 0.4]), L=0.5)
    assert np.allclose(p.ell_v(GridSpec(2, 2)), [0.1, 0.2])
    with pytest.raises(GridError):
        p.alpha_field(GridSpec(3, 2))

import numpy as np
import pytest

from kintraffic.core import GridSpec, ModelParams
from kintraffic.kernels import encounter_rate, perceived_density_linear, transition_row_discrete


def random_field(grid: GridSpec, rng, max_density: float = 0.9) -> np.ndarray:
    """Nonnegative field whose local densities stay below ``max_density``."""
    f = rng.random(grid.shape) ** 2
    rho = f.sum(axis=2).sum(axis=1) * grid.dv * grid.du
    target = max_density * rng.random(grid.n_x)
    return f * (target / np.maximum(rho, 1e-300))[:, None, None]


def naive_gain_loss(f, grid: GridSpec, params: ModelParams):
    """Plain loops over every cell and pair, rows from the reference numpy implementation."""
    n_x, n_v, n_u = grid.shape
    dv, du = grid.dv, grid.du
    alpha = params.alpha_field(grid)
    gain = np.zeros(grid.shape)
    loss = np.zeros(grid.shape)
    for ix in range(n_x):
        rho = 0.0
        for iv in range(n_v):
            for iu in range(n_u):
                rho += f[ix, iv, iu] * dv * du
        rho_p = float(perceived_density_linear(rho))
        eta = float(encounter_rate(rho_p, params.eta0, params.gamma_eta))
        for iu in range(n_u):
            rows = {}
            for a in range(n_v):
                for b in range(n_v):
                    rows[a, b] = transition_row_discrete(grid.v[a], grid.v[b], grid.u[iu], alpha[ix], rho_p, grid,
                                                         params.kappa, params.sigma_floor, params.row_rule)
            for c in range(n_v):
                acc = 0.0
                for a in range(n_v):
                    for b in range(n_v):
                        for ju in range(n_u):
                            acc += rows[a, b][c] / dv * f[ix, a, iu] * f[ix, b, ju] * dv * dv * du
                gain[ix, c, iu] = eta * acc
                loss[ix, c, iu] = f[ix, c, iu] * eta * rho
    return gain, loss


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

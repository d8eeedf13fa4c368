import numpy as np
import pytest

from otgeo.errors import ConfigInvalid, InfeasibleMarginals, NoConvergence
from otgeo.geometry.densities import DensityPair, make_density
from otgeo.transport.exact import solve_exact
from otgeo.transport.measures import DiscreteMeasure, discretize
from otgeo.transport.sinkhorn import solve_sinkhorn

from conftest import UNIT2, eps_schedule, setup, solve_on_grid


def test_self_transport_is_cheap(identity2):
    # atoms far apart relative to sqrt(eps): the kernel barely spreads mass
    model, dens, _ = identity2
    mu = discretize(dens.rho, grid=3)
    sol = solve_sinkhorn(model.cost_matrix(mu.points, mu.points), mu, mu, [0.1, 0.03, 1e-2])
    assert sol.objective < 1e-3
    assert sol.marginal_residual() < 1e-6
    assert sol.duality_gap >= 0


@pytest.mark.parametrize("dim", [1, 2])
def test_self_transport_continuum_blur(dim):
    """On fine grids the entropic self-plan is a Gaussian blur with cost close to n eps / 2."""
    box = UNIT2[:dim]
    model, dens, _ = setup("quadratic", box, box)
    mu = discretize(dens.rho, grid=48 if dim == 1 else 20)
    eps = 1e-2
    sol = solve_sinkhorn(model.cost_matrix(mu.points, mu.points), mu, mu, [0.1, 0.03, eps])
    # reflecting walls trim the blur slightly
    assert 0.8 * dim * eps / 2 < sol.objective < dim * eps / 2


@pytest.mark.parametrize("N", [32, 64])
def test_one_dim_rescaling_close_to_exact(rescale1, N):
    model, dens, _ = rescale1
    mu, nu = discretize(dens.rho, grid=N), discretize(dens.rho_bar, grid=N)
    C = model.cost_matrix(mu.points, nu.points)
    exact = solve_exact(C, mu, nu)
    eps = 1.0 / N**2
    sol = solve_sinkhorn(C, mu, nu, eps_schedule(eps))
    assert abs(sol.objective - exact.objective) < 5 * eps * np.log(N)


def test_halving_eps_reduces_gap(identity2):
    model, _, _ = identity2
    dens = DensityPair(make_density("uniform", UNIT2),
                       make_density("gaussian_clipped", UNIT2, {"mean": [0.6, 0.4], "sigma": 0.3}))
    mu, nu = discretize(dens.rho, grid=10), discretize(dens.rho_bar, grid=10)
    C = model.cost_matrix(mu.points, nu.points)
    exact = solve_exact(C, mu, nu).objective
    gaps = [solve_sinkhorn(C, mu, nu, eps_schedule(e)).objective - exact for e in (4e-3, 2e-3, 1e-3)]
    assert gaps[0] > gaps[1] > gaps[2] >= -1e-12


def test_marginals_and_gap_sign(logcost2):
    model, dens, _ = logcost2
    sol = solve_on_grid(model, dens, 12)
    assert sol.marginal_residual() < 1e-6
    assert sol.duality_gap >= 0
    assert sol.row_entropy.shape == (144,)
    assert np.array_equal(sol.sharp, sol.row_entropy <= 0.75 * np.log(144))


def test_rows_sharpen_relative_to_threshold(log_solution):
    # row entropy at eps = dx^2 stays near 4.3 nats while the threshold grows with log N
    sol = log_solution(24)
    assert sol.sharp.all()
    assert np.max(sol.row_entropy) < 0.75 * np.log(24**2)


@pytest.mark.parametrize("schedule", [[], [0.1, -1.0], [0.01, 0.1], [np.inf]])
def test_bad_schedules(schedule):
    mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    with pytest.raises(ConfigInvalid):
        solve_sinkhorn(np.zeros((2, 2)), mu, mu, schedule)


def test_infeasible_marginals():
    mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    nu = DiscreteMeasure([[0.0], [1.0]], [0.4, 0.5])
    with pytest.raises(InfeasibleMarginals):
        solve_sinkhorn(np.zeros((2, 2)), mu, nu, [0.1])


def test_no_convergence(identity2):
    model, dens, _ = identity2
    mu = discretize(dens.rho, grid=8)
    nu = discretize(make_density("gaussian_clipped", UNIT2, {"sigma": 0.2}), grid=8)
    with pytest.raises(NoConvergence):
        solve_sinkhorn(model.cost_matrix(mu.points, nu.points), mu, nu, [1e-4], max_iters=3)


def test_first_order_condition_improves(logcost2):
    """grad u(x) + grad_x c(x, F(x)) shrinks under refinement at interior points."""
    model, dens, _ = logcost2
    x = np.array([0.5, 0.5])
    res = []
    for N in (16, 32):
        sol = solve_on_grid(model, dens, N)
        h = sol.grid_step
        u = sol.potential_function()
        grad_u = np.array([(u(x + h * e) - u(x - h * e)) / (2 * h) for e in np.eye(2)])
        res.append(np.linalg.norm(grad_u + model.grad_x(x, sol.soft_map(x))))
    assert res[1] < 0.5 * res[0]

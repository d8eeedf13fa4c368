import numpy as np
import pytest
from scipy.linalg import eigh

from otgeo.estimates.cutoff import make_cutoff
from otgeo.estimates.pogorelov import (check_max_point_inequality, check_pogorelov_bound,
                                       inverse_problem, locate_max_point, top_eigenvalue)
from otgeo.geometry.curvature import riemann_curvature
from otgeo.geometry.metrics import MetricField, chi
from otgeo.geometry.mtw import estimate_kappa
from otgeo.graph.chart import GraphChart
from otgeo.graph.frame import induced_frame
from otgeo.transport.second_order import second_order_data

from conftest import LOG_TARGET, UNIT2, solve_on_grid

REGION = ([[0.15, 0.85], [0.15, 0.85]], LOG_TARGET)


@pytest.fixture(scope="module")
def identity_chart(identity2):
    model, dens, _ = identity2
    return GraphChart.from_solution(solve_on_grid(model, dens, 16, method="exact"))


@pytest.fixture(scope="module")
def log_kappa(logcost2):
    model, dens, _ = logcost2
    return estimate_kappa(model, dens, REGION, grid=3)


def log_cutoff():
    return make_cutoff([0.5, 0.5], 0.35, UNIT2)


def test_identity_transport(identity2, identity_chart):
    _, _, geo = identity2
    center = identity_chart.base.points[identity_chart.base.flat_index((7, 8))]
    cut = make_cutoff(center, 0.3, UNIT2)
    mp = locate_max_point(identity_chart, geo, None, cut)
    assert mp.grid_index == (7, 8) and mp.mu_n == pytest.approx(1.0, abs=1e-12)
    rep = check_pogorelov_bound(identity_chart, geo, cut, 0.4)
    assert rep.kappa == pytest.approx(0.9 * 0.4)
    assert rep.C_bound == pytest.approx(rep.kappa ** (2 - 1), rel=1e-12)
    assert all(np.allclose(row["mus"], 1.0) for row in rep.table)
    assert rep.eigen_bound_ok


def test_one_dim_rescaling_argmax_at_center(rescale1):
    model, dens, geo = rescale1
    chart = GraphChart.from_solution(solve_on_grid(model, dens, 32, method="exact"))
    center = chart.base.points[13]
    mp = locate_max_point(chart, geo, None, make_cutoff(center, 0.2, [[0, 1]]))
    assert mp.grid_index == (13,) and mp.mu_n == pytest.approx(1.0, abs=1e-10)
    rep = check_pogorelov_bound(chart, geo, make_cutoff(center, 0.2, [[0, 1]]), None)
    assert "n1_no_bound" in rep.flags and rep.C_bound is None
    assert all(np.allclose(row["lambda_sums"], 2.0) for row in rep.table)


def planted_field(geo, bump_at, height=50.0, width=0.03):
    """S_hat with a narrow Gaussian bump in the x-block, centred at ``bump_at``."""
    def S(p):
        out = geo.S_hat.eval(p).copy()
        out[:2, :2] *= 1 + height * np.exp(-np.sum((p[:2] - bump_at) ** 2) / (2 * width**2))
        return out
    return MetricField(S, (4, 0), "planted")


def test_planted_bump(identity2, identity_chart):
    _, _, geo = identity2
    base = identity_chart.base
    target = (5, 10)
    field = planted_field(geo, base.points[base.flat_index(target)])
    cut = make_cutoff([0.5, 0.5], 0.4, UNIT2)
    mp = locate_max_point(identity_chart, geo, field, cut)
    # direct scan of the planted field
    best, best_idx = -np.inf, None
    for k in np.flatnonzero(base.interior_mask()):
        x = base.points[k]
        v = float(cut.value(x)) ** 2 * top_eigenvalue(identity_chart, geo, field, x)
        if v > best:
            best, best_idx = v, base.grid_index(k)
    assert mp.grid_index == best_idx == target
    scaled = locate_max_point(identity_chart, geo, field.scaled(7.0), cut)
    assert scaled.grid_index == target and scaled.mu_n == pytest.approx(7 * mp.mu_n)
    assert np.allclose(np.abs(scaled.frame.e[:, -1]), np.abs(mp.frame.e[:, -1]))


def test_max_point_ratio_flat(flat2, identity_chart):
    _, _, geo = flat2
    cut = make_cutoff([0.5, 0.5], 0.3, UNIT2)
    frame = induced_frame(identity_chart, geo, np.array([0.5, 0.5]) - 1 / 32)
    assert check_max_point_inequality(frame, geo, cut) <= 0


def test_max_point_ratio_log_cost(logcost2, log_chart):
    _, _, geo = logcost2
    cut = log_cutoff()
    ratios = []
    for N in (16, 32):
        mp = locate_max_point(log_chart(N), geo, None, cut)
        ratios.append(check_max_point_inequality(mp.frame, geo, cut))
    assert all(0 < r < np.inf for r in ratios)
    assert abs(ratios[1] - ratios[0]) / ratios[1] < 0.2
    # sensitivity: inflating the curvature tensor by 1e6 scales the ratio by 1e6
    mp = locate_max_point(log_chart(16), geo, None, cut)
    R = riemann_curvature(geo.g_hat, mp.frame.p).riemann
    big = check_max_point_inequality(mp.frame, geo, cut, riemann=1e6 * R)
    assert big == pytest.approx(1e6 * ratios[0], rel=1e-12)


def test_quadratic_cost_is_flagged(identity2, identity_chart):
    model, dens, geo = identity2
    kap = estimate_kappa(model, dens, grid=2, n_rotations=1)
    rep = check_pogorelov_bound(identity_chart, geo, make_cutoff([0.5, 0.5], 0.3, UNIT2), kap)
    assert "KappaNonpositive" in rep.flags
    assert rep.C_bound is None and rep.table and "lambda_sums" in rep.table[0]


def test_log_cost_report(logcost2, log_chart, log_kappa):
    _, _, geo = logcost2
    rep = check_pogorelov_bound(log_chart(16), geo, log_cutoff(), log_kappa)
    assert rep.kappa_raw == pytest.approx(log_kappa.kappa) and rep.kappa == pytest.approx(0.9 * rep.kappa_raw)
    assert np.isfinite(rep.C_bound) and rep.C_bound > 0
    assert rep.eigen_bound_ok and rep.eigen_bound_max_ratio <= 1
    assert rep.C_key > 0 and np.isfinite(rep.C_maxpoint)
    # the key inequality holds with equality at C_key
    n, mu = 2, rep.mu_n
    assert rep.curvature_sum == pytest.approx(rep.kappa / rep.C_key * mu ** (n / (n - 1)) - rep.C_key * mu,
                                              rel=1e-9)
    assert set(rep.norms) == {"g_hat_C2", "g_hat_inv_C0", "S_hat_C2", "cutoff_C2", "log_density_C0"}


@pytest.mark.parametrize("t", [0.5, 0.8])
def test_cutoff_scale_covariance(logcost2, log_chart, log_kappa, t):
    _, _, geo = logcost2
    cut = log_cutoff()
    base = check_pogorelov_bound(log_chart(16), geo, cut, log_kappa)
    scaled = check_pogorelov_bound(log_chart(16), geo, cut.scaled(t), log_kappa)
    assert scaled.C_bound == pytest.approx(t ** (2 * 2 - 2) * base.C_bound, rel=1e-12)
    assert np.array_equal(scaled.x0, base.x0)


def test_inverse_problem_reciprocal_eigenvalues(logcost2, log_solution):
    model, dens, geo = logcost2
    sol = log_solution(16)
    x = np.array([0.5, 0.5])
    fwd = second_order_data(model, dens, sol, x)
    inv_model, inv_dens = inverse_problem(geo, x, fwd.Fx)
    # the inverse map near F(x) has Jacobian DF^-1
    c_inv = inv_model.mixed(fwd.Fx, x)
    B_inv = -c_inv @ np.linalg.inv(fwd.DF)
    A_inv = chi(inv_model, inv_dens, fwd.Fx, x) * 0.5 * (B_inv + B_inv.T)
    lam_inv = eigh(A_inv, inv_model.h, eigvals_only=True)
    assert np.allclose(np.sort(1 / lam_inv), fwd.lambdas, rtol=0.05)

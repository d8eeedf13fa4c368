import json
from pathlib import Path

import numpy as np
import pytest

from otgeo.geometry.costs import make_cost
from otgeo.geometry.densities import DensityPair, make_density
from otgeo.geometry.metrics import build_geometry
from otgeo.graph.chart import GraphChart
from otgeo.transport.exact import solve_exact
from otgeo.transport.measures import discretize
from otgeo.transport.sinkhorn import solve_sinkhorn

FROZEN = Path(__file__).parent / "oracles" / "frozen"
UNIT2 = [[0.0, 1.0], [0.0, 1.0]]
LOG_TARGET = [[2.0, 3.0], [0.0, 1.0]]
LOG_PROBES = np.array([[0.5, 0.5], [0.4, 0.6], [0.6, 0.45]])


def frozen(name: str) -> dict:
    return json.loads((FROZEN / f"{name}.json").read_text())


def eps_schedule(eps):
    return [e for e in (1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001, 3e-4, 1e-4) if e > eps] + [eps]


def uniform_pair(box_x, box_xbar):
    return DensityPair(make_density("uniform", box_x), make_density("uniform", box_xbar))


def setup(kind, box_x, box_xbar, dens=None, **kw):
    model = make_cost(kind, len(box_x), box_x, box_xbar, **kw)
    dens = dens or uniform_pair(box_x, box_xbar)
    return model, dens, build_geometry(model, dens)


def solve_on_grid(model, dens, N, method="sinkhorn", eps_factor=1.0):
    mu = discretize(dens.rho, grid=N)
    nu = discretize(dens.rho_bar, grid=N)
    C = model.cost_matrix(mu.points, nu.points)
    if method == "exact":
        return solve_exact(C, mu, nu, cost=model)
    dx = float(np.min(mu.spacing))
    return solve_sinkhorn(C, mu, nu, eps_schedule(eps_factor * dx * dx), cost=model)


@pytest.fixture(scope="session")
def flat2():
    return setup("bilinear", UNIT2, UNIT2)


@pytest.fixture(scope="session")
def identity2():
    return setup("quadratic", UNIT2, UNIT2)


@pytest.fixture(scope="session")
def rescale1():
    """1-D uniform[0,1] -> uniform[0,2], quadratic cost; optimal map x -> 2x."""
    return setup("quadratic", [[0.0, 1.0]], [[0.0, 2.0]])


@pytest.fixture(scope="session")
def logcost2():
    return setup("log_distance", UNIT2, LOG_TARGET)


_LOG_SOLUTIONS = {}


@pytest.fixture(scope="session")
def log_solution(logcost2):
    """Entropic solutions of the 2-D log-cost problem, cached per grid size."""
    model, dens, _ = logcost2

    def get(N):
        if N not in _LOG_SOLUTIONS:
            _LOG_SOLUTIONS[N] = solve_on_grid(model, dens, N)
        return _LOG_SOLUTIONS[N]

    return get


@pytest.fixture(scope="session")
def log_chart(log_solution):
    def get(N, step=None):
        return GraphChart.from_solution(log_solution(N), step)

    return get


# -- acceptance summary -------------------------------------------------------

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    failed = rep.failed or (rep.when == "call" and rep.skipped)
    if rep.when == "call" or failed:
        prev = _ACCEPTANCE.get(number)
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        status = "FAIL" if failed or (prev and prev[0] == "FAIL") else "PASS"
        _ACCEPTANCE[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[number]
        line = f"criterion {number} {status}: {title}"
        terminalreporter.write_line(line + (f" [{detail}]" if detail else ""))

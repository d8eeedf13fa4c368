"""Induced metric versus the Hessian metric of the transport potential."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..errors import WrongCostKind
from ..fd import central_hessian
from ..geometry.metrics import Geometry, chi
from ..transport.solution import TransportSolution
from .chart import GraphChart

HESSIAN_KINDS = ("quadratic", "bilinear")


def _potential_callable(chart: GraphChart, dual_u):
    if isinstance(dual_u, TransportSolution):
        return dual_u.potential_function()
    if callable(dual_u):
        return dual_u
    base = chart.base
    if base is None:
        raise ValueError("grid values of u need a chart with a base grid")
    vals = np.asarray(dual_u, dtype=float).reshape(tuple(base.shape))
    interp = RegularGridInterpolator(base.axes, vals, bounds_error=False, fill_value=None)
    return lambda x: interp(np.atleast_2d(x))[0]


def hessian_metric_check(chart: GraphChart, geometry: Geometry, dual_u, x0) -> float:
    """Relative Frobenius mismatch between ``g / (2 chi)`` and ``D^2 phi`` at ``x0``.

    ``phi`` is the convex potential of the map: ``|x|^2/2 + u`` for the
    quadratic cost and ``u`` for the bilinear cost, with ``u`` the source dual
    potential (``u + ubar + c >= 0``). ``dual_u`` may be a callable, a
    :class:`TransportSolution` or an array of values on the chart's base grid.
    """
    model = geometry.model
    if model is None or model.kind not in HESSIAN_KINDS:
        kind = None if model is None else model.kind
        raise WrongCostKind(f"Hessian metric comparison needs a quadratic or bilinear cost, got {kind}")
    x0 = chart.resolve(x0)
    u = _potential_callable(chart, dual_u)
    hess = central_hessian(lambda x: np.asarray(u(x), dtype=float), x0, chart.step)
    if model.kind == "quadratic":
        hess = hess + np.eye(chart.dim)
    g = chart.restricted(geometry.g_hat, x0)
    xbar = chart.F(x0)
    scaled = g / (2.0 * chi(model, geometry.dens, x0, xbar))
    return float(np.linalg.norm(scaled - hess) / np.linalg.norm(hess))

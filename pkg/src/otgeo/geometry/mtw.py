"""Ma-Trudinger-Wang sectional curvature and a grid estimate of its uniform lower bound."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import special_ortho_group

from ..errors import ConfigInvalid, NotOrthogonal
from .costs import CostModel, as_box
from .curvature import riemann_curvature, sectional
from .densities import DensityPair
from .metrics import MetricField, chi, cross_hessian, h_bar, kmw_metric

ORTH_TOL = 1e-8


def project_orthogonal(model: CostModel, dens: DensityPair, x, xbar, xi, xibar):
    """Remove from ``xibar`` its h_bar-component along the covector ``M^T xi``."""
    M = cross_hessian(model, x, xbar, check=False)
    hb = h_bar(model, dens, x, xbar)
    w = M.T @ np.asarray(xi, float)
    v = np.linalg.solve(hb, w)
    xibar = np.asarray(xibar, float)
    return xibar - (w @ xibar) / (w @ v) * v


def mtw_sectional(model: CostModel, dens: DensityPair, x, xbar, xi, xibar, *,
                  project: bool = False, orth_tol: float = ORTH_TOL,
                  g_hat: MetricField | None = None, stencil_h: float | None = None) -> float:
    """``Rhat(xi+0, 0+xibar, xi+0, 0+xibar)`` for a g_hat-orthogonal pair."""
    n = model.dim
    x, xbar = np.asarray(x, float), np.asarray(xbar, float)
    xi, xibar = np.asarray(xi, float), np.asarray(xibar, float)
    if not (np.any(xi) and np.any(xibar)):
        raise ValueError("xi and xibar must be nonzero")
    model.check_point(x, xbar)
    if project:
        xibar = project_orthogonal(model, dens, x, xbar, xi, xibar)
    M = cross_hessian(model, x, xbar, check=False)
    c = chi(model, dens, x, xbar, check=False)
    inner = -c * xi @ M @ xibar
    scale = c * np.linalg.norm(M, 2) * np.linalg.norm(xi) * np.linalg.norm(xibar)
    if abs(inner) > orth_tol * max(scale, 1e-300):
        raise NotOrthogonal(f"g_hat(xi, xibar) = {inner:.3e} exceeds tolerance")
    g_hat = g_hat or kmw_metric(model, dens)
    R = riemann_curvature(g_hat, np.r_[x, xbar], stencil_h).riemann
    V = np.r_[xi, np.zeros(n)]
    W = np.r_[np.zeros(n), xibar]
    return sectional(R, V, W, V, W)


def orthogonal_pairs(model: CostModel, dens: DensityPair, x, xbar, rotations):
    """Coordinate-aligned g_hat-orthogonal pairs from a dual-frame construction.

    For an h-orthonormal basis ``xi_1..xi_n`` (rotated by each entry of
    ``rotations``), the dual vectors satisfy ``g_hat(xi_i, xibar_j) = delta_ij``,
    and every ``(xi_i, xibar_j)`` with ``i != j`` is an orthogonal pair.
    """
    n = model.dim
    M = cross_hessian(model, x, xbar, check=False)
    c = chi(model, dens, x, xbar, check=False)
    w, V = np.linalg.eigh(model.h)
    h_inv_sqrt = V @ np.diag(w**-0.5) @ V.T
    pairs = []
    for Q in rotations:
        Xi = h_inv_sqrt @ Q
        Xibar = np.linalg.solve(-c * M, np.linalg.inv(Xi).T)
        for i, j in itertools.permutations(range(n), 2):
            pairs.append((Xi[:, i], Xibar[:, j]))
    return pairs


@dataclass
class KappaEstimate:
    kappa: float | None
    mtw_violated: bool
    min_ratio: float | None
    n_points: int
    n_pairs: int
    grid: int
    flags: list[str] = field(default_factory=list)


def estimate_kappa(model: CostModel, dens: DensityPair, region=None, grid: int = 4,
                   S_hat: MetricField | None = None, *, n_rotations: int = 8,
                   seed: int = 0) -> KappaEstimate:
    """Grid minimum of ``mtw_sectional / (h(xi,xi) h_bar(xibar,xibar))``, floored at 0.

    ``region`` is a pair of boxes ``(box_x, box_xbar)`` (defaults to the cost
    domain). Pairs per point: the identity dual frame plus ``n_rotations``
    rotations drawn once from a seeded generator.
    """
    n = model.dim
    if n == 1:
        return KappaEstimate(None, False, None, 0, 0, grid, ["kappa_undefined_n1"])
    if grid < 2:
        raise ConfigInvalid("kappa grid resolution must be >= 2")
    if region is None:
        region = (model.domain_x, model.domain_xbar)
    bx, bxb = as_box(region[0], n), as_box(region[1], n)
    rng = np.random.default_rng(seed)
    rotations = [np.eye(n)] + [special_ortho_group.rvs(n, random_state=rng) for _ in range(n_rotations)]
    g_hat = kmw_metric(model, dens)
    axes = [np.linspace(lo, hi, grid) for lo, hi in np.vstack([bx, bxb])]
    lowest = np.inf
    n_pts = n_pairs = 0
    for p in itertools.product(*axes):
        p = np.array(p)
        x, xbar = p[:n], p[n:]
        R = riemann_curvature(g_hat, p).riemann
        hb = h_bar(model, dens, x, xbar) if S_hat is None else S_hat.eval(p)[n:, n:]
        for xi, xibar in orthogonal_pairs(model, dens, x, xbar, rotations):
            V = np.r_[xi, np.zeros(n)]
            W = np.r_[np.zeros(n), xibar]
            ratio = sectional(R, V, W, V, W) / ((xi @ model.h @ xi) * (xibar @ hb @ xibar))
            lowest = min(lowest, ratio)
            n_pairs += 1
        n_pts += 1
    violated = bool(lowest <= 0)
    flags = ["mtw_violated"] if violated else []
    return KappaEstimate(max(0.0, float(lowest)), violated, float(lowest), n_pts, n_pairs, grid, flags)

"""Maximum-point search and observed constants of the interior second-derivative bound."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from ..errors import ConfigInvalid, EmptySupport
from ..geometry.curvature import riemann_curvature, sectional
from ..geometry.densities import DensityPair
from ..geometry.metrics import Geometry, MetricField, h_bar
from ..geometry.mtw import KappaEstimate
from ..graph.chart import GraphChart
from ..graph.frame import GraphFrame, induced_frame
from .cutoff import Cutoff

KAPPA_DEFLATION = 0.9
TIE_RTOL = 1e-9


@dataclass
class MaxPoint:
    x: np.ndarray
    grid_index: tuple
    mu_n: float
    phi: float
    value: float
    frame: GraphFrame


def _samples(chart: GraphChart):
    base = chart.base
    if base is None:
        raise ConfigInvalid("a chart with a base grid is needed to scan samples")
    idx = np.flatnonzero(base.interior_mask(margin=1))
    return [(base.grid_index(k), base.points[k]) for k in idx]


def top_eigenvalue(chart: GraphChart, geometry: Geometry, S_hat: MetricField, x) -> float:
    """Largest eigenvalue of ``S`` with respect to ``g`` at ``(x, F(x))``."""
    g = chart.restricted(geometry.g_hat, x)
    S = chart.restricted(S_hat, x)
    return float(eigh(0.5 * (S + S.T), 0.5 * (g + g.T), eigvals_only=True)[-1])


def locate_max_point(chart: GraphChart, geometry: Geometry, S_hat: MetricField | None,
                     cutoff: Cutoff) -> MaxPoint:
    """Grid argmax of ``phi^(2n-2) mu_n`` over interior samples with ``phi > 0``.

    Values within a relative ``1e-9`` of the maximum count as ties; ties go to
    the larger ``phi`` and then to the lexicographically smallest grid index.
    """
    S_hat = geometry.S_hat if S_hat is None else S_hat
    n = chart.dim
    rows = []
    for gi, x in _samples(chart):
        phi = float(cutoff.value(x))
        if phi <= 0:
            continue
        mu = top_eigenvalue(chart, geometry, S_hat, x)
        rows.append((phi ** (2 * n - 2) * mu, phi, gi, x, mu))
    if not rows:
        raise EmptySupport("cutoff vanishes at every interior sample")
    best = max(r[0] for r in rows)
    tied = [r for r in rows if r[0] >= best - TIE_RTOL * abs(best)]
    top_phi = max(r[1] for r in tied)
    tied = [r for r in tied if r[1] >= top_phi * (1 - TIE_RTOL)]
    value, phi, gi, x, mu = min(tied, key=lambda r: r[2])
    frame = induced_frame(chart, geometry, x, S_hat=S_hat)
    return MaxPoint(x, gi, mu, phi, value, frame)


def _riemann_at(geometry: Geometry, p, riemann=None):
    return riemann_curvature(geometry.g_hat, p).riemann if riemann is None else riemann


def check_max_point_inequality(frame: GraphFrame, geometry: Geometry, cutoff: Cutoff,
                               riemann: np.ndarray | None = None) -> float:
    """``[sum_l Rhat(e_l, e_n, e_l, e_n)] * phi^2 / S(e_n, e_n)`` at the frame's point.

    ``riemann`` overrides the curvature tensor (product-chart components).
    """
    R = _riemann_at(geometry, frame.p, riemann)
    e = frame.e
    en = e[:, -1]
    num = sum(sectional(R, e[:, l], en, e[:, l], en) for l in range(e.shape[1]))
    phi = float(cutoff.value(frame.x))
    return float(num * phi**2 / frame.mus[-1])


@dataclass
class PogorelovReport:
    x0: np.ndarray
    mu_n: float
    phi0: float
    kappa: float | None
    kappa_raw: float | None
    C_maxpoint: float | None
    C_bound: float | None
    C_key: float | None
    curvature_sum: float | None
    eigen_bound_ok: bool | None
    eigen_bound_max_ratio: float | None
    norms: dict
    table: list = field(default_factory=list)
    flags: list = field(default_factory=list)


def _kappa_value(kappa):
    if isinstance(kappa, KappaEstimate):
        return kappa.kappa
    return None if kappa is None else float(kappa)


def _key_constant(curv_sum: float, kappa: float, mu_n: float, n: int) -> float:
    """Smallest ``C > 0`` with ``curv_sum >= (kappa / C) mu_n^(n/(n-1)) - C mu_n``."""
    a = mu_n ** (n / (n - 1))
    b = mu_n
    return float((-curv_sum + np.sqrt(curv_sum**2 + 4 * b * kappa * a)) / (2 * b))


def _c2_norm(field: MetricField, p) -> float:
    return float(max(np.max(np.abs(t)) for t in field.jet(p)))


def check_pogorelov_bound(chart: GraphChart, geometry: Geometry, cutoff: Cutoff, kappa,
                          solution=None) -> PogorelovReport:
    """Observed constants of ``kappa^(n-1) phi^(2n-2) S <= C g`` on the sampled graph.

    ``kappa`` (a number or a :class:`KappaEstimate`) is deflated by 10%.
    ``C_bound`` is the sample maximum of ``kappa^(n-1) phi^(2n-2) mu_n``; each
    table row is checked against ``lambda + 1/lambda <= 2 C_bound kappa^(1-n) phi^(2-2n)``.
    ``C_key`` is the smallest constant for which the curvature lower bound
    ``sum_{i<n} Rhat(e_i, e_n, e_i, e_n) >= (kappa/C) mu_n^(n/(n-1)) - C mu_n``
    holds at the maximum point. Without a positive kappa (or for n = 1) only
    the eigenvalue table is produced and a flag is recorded.
    """
    n = chart.dim
    model, dens = geometry.model, geometry.dens
    k_raw = _kappa_value(kappa)
    flags = []
    if n == 1:
        flags.append("n1_no_bound")
        k_used = None
    elif k_raw is None or k_raw <= 0:
        flags.append("KappaNonpositive")
        k_used = None
    else:
        k_used = KAPPA_DEFLATION * k_raw

    table = []
    C_bound = 0.0
    log_ratio = 0.0
    for gi, x in _samples(chart):
        phi = float(cutoff.value(x))
        if phi <= 0:
            continue
        frame = induced_frame(chart, geometry, x)
        lam = frame.lambdas
        row = {"index": list(gi), "x": x.tolist(), "phi": phi, "mus": frame.mus.tolist()}
        if lam is not None:
            row["lambdas"] = lam.tolist()
            row["lambda_sums"] = (lam + 1 / lam).tolist()
        if k_used is not None:
            row["bound_value"] = k_used ** (n - 1) * phi ** (2 * n - 2) * frame.mu_max
            C_bound = max(C_bound, row["bound_value"])
        if dens is not None:
            log_ratio = max(log_ratio, abs(float(dens.rho.log_value(x))
                                           - 0.5 * np.log(np.linalg.det(model.h))))
        table.append(row)
    if not table:
        raise EmptySupport("cutoff vanishes at every interior sample")

    mp = locate_max_point(chart, geometry, None, cutoff)
    p0 = mp.frame.p
    norms = {
        "g_hat_C2": _c2_norm(geometry.g_hat, p0),
        "g_hat_inv_C0": float(np.max(np.abs(geometry.g_hat.inverse(p0)))),
        "S_hat_C2": _c2_norm(geometry.S_hat, p0),
        "cutoff_C2": float(max(abs(cutoff.value(p0)), np.max(np.abs(cutoff.grad(p0))),
                               np.max(np.abs(cutoff.hessian(p0))))),
        "log_density_C0": float(log_ratio),
    }
    report = PogorelovReport(mp.x, mp.mu_n, mp.phi, k_used, k_raw, None, None, None, None,
                             None, None, norms, table, flags)
    if n == 1:
        return report
    R = riemann_curvature(geometry.g_hat, p0).riemann
    e = mp.frame.e
    en = e[:, -1]
    report.curvature_sum = float(sum(sectional(R, e[:, i], en, e[:, i], en) for i in range(n - 1)))
    report.C_maxpoint = check_max_point_inequality(mp.frame, geometry, cutoff, riemann=R)
    if k_used is None:
        return report
    report.C_bound = float(C_bound)
    report.C_key = _key_constant(report.curvature_sum, k_used, mp.mu_n, n)
    worst = 0.0
    for row in table:
        if "lambda_sums" not in row:
            continue
        allowed = 2 * C_bound * k_used ** (1 - n) * row["phi"] ** (2 - 2 * n)
        worst = max(worst, max(row["lambda_sums"]) / allowed)
    report.eigen_bound_max_ratio = float(worst)
    report.eigen_bound_ok = bool(worst <= 1 + 1e-12)
    return report


def inverse_problem(geometry: Geometry, x, xbar):
    """Cost and densities of the inverse problem, with ``h_bar(x, xbar)`` as the new reference metric.

    With this choice the eigenvalues of the inverse problem at ``xbar`` are
    the reciprocals of those of the forward problem at ``x``.
    """
    model, dens = geometry.model, geometry.dens
    hb = h_bar(model, dens, np.asarray(x, float), np.asarray(xbar, float))
    return model.swapped(h=0.5 * (hb + hb.T)), DensityPair(dens.rho_bar, dens.rho)

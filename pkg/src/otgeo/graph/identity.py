"""Residual of the elliptic identity satisfied by the restriction of S_hat to a maximal graph.

The left side is the rough Laplacian of the restricted tensor ``S``, computed
in the x-chart from finite differences of ``g`` and ``S``. The right side is
assembled at the point from ambient jets, the second fundamental form and
the ambient curvature, split into eight term groups.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MeanCurvatureTooLarge
from ..fd import field_jet
from ..geometry.curvature import christoffel_jet, riemann_from_jet
from ..geometry.metrics import Geometry, MetricField
from .chart import GraphChart
from .frame import GraphFrame, induced_frame, second_fundamental_form

TERM_GROUPS = (
    "ambient_hessian",
    "dS_II_X",
    "dS_II_Y",
    "S_II_II",
    "gII_S_X",
    "gII_S_Y",
    "sigma_curvature",
    "tangential_curvature",
)

H_FACTOR = 10.0


@dataclass
class IdentityReport:
    point: np.ndarray
    lhs: float
    rhs_terms: dict
    residual: float
    grid_step: float
    H_norm: float
    H_ok: bool
    X: np.ndarray = field(repr=False, default=None)
    Y: np.ndarray = field(repr=False, default=None)

    @property
    def rhs(self) -> float:
        return float(sum(self.rhs_terms.values()))


def _chart_fields(chart: GraphChart, g_hat: MetricField, S_hat: MetricField):
    def fields(x):
        T = chart.tangent_basis(x)
        p = chart.lift(x)
        return np.stack([T.T @ g_hat.eval(p) @ T, T.T @ S_hat.eval(p) @ T])

    return fields


def intrinsic_laplacian(chart: GraphChart, geometry: Geometry, S_hat: MetricField, x0,
                        step: float | None = None) -> np.ndarray:
    """Chart components ``(Delta S)_ab = g^ij (D^2_ij S)_ab`` of the restricted tensor."""
    step = chart.step if step is None else step
    J0, J1, J2 = field_jet(_chart_fields(chart, geometry.g_hat, S_hat), np.asarray(x0, float), step)
    g, S = J0
    dg, dS = J1[:, 0], J1[:, 1]
    d2g, d2S = J2[:, :, 0], J2[:, :, 1]
    d2g = 0.5 * (d2g + d2g.transpose(1, 0, 2, 3))
    d2S = 0.5 * (d2S + d2S.transpose(1, 0, 2, 3))
    gam, dgam = christoffel_jet(g, dg, d2g)
    # first covariant derivative and its chart derivative
    DS = dS - np.einsum("kja,kb->jab", gam, S) - np.einsum("kjb,ak->jab", gam, S)
    dDS = (d2S
           - np.einsum("ikja,kb->ijab", dgam, S) - np.einsum("kja,ikb->ijab", gam, dS)
           - np.einsum("ikjb,ak->ijab", dgam, S) - np.einsum("kjb,iak->ijab", gam, dS))
    D2S = (dDS
           - np.einsum("kij,kab->ijab", gam, DS)
           - np.einsum("kia,jkb->ijab", gam, DS)
           - np.einsum("kib,jak->ijab", gam, DS))
    return np.einsum("ij,ijab->ab", np.linalg.inv(g), D2S)


def _direction(frame: GraphFrame, v) -> np.ndarray:
    """Frame coefficients of a direction: None -> e_n, int k -> e_k, else as given."""
    n = frame.e.shape[1]
    if v is None:
        v = n - 1
    if np.ndim(v) == 0:
        out = np.zeros(n)
        out[int(v)] = 1.0
        return out
    return np.asarray(v, dtype=float)


def rhs_terms(frame: GraphFrame, II: np.ndarray, G_jet, S_jet, Xf, Yf) -> dict:
    """The eight right-hand term groups at one point.

    ``II[k, l]`` is ``II(e_k, e_l)`` as an ambient vector; ``G_jet`` and ``S_jet``
    are ``(value, d, d2)`` jets of g_hat and S_hat; ``Xf, Yf`` are frame
    coefficients of the directions.
    """
    G, dG, d2G = G_jet
    Sh, dSh, d2Sh = S_jet
    d2G = 0.5 * (d2G + np.swapaxes(d2G, 0, 1))
    d2Sh = 0.5 * (d2Sh + np.swapaxes(d2Sh, 0, 1))
    e = frame.e
    X, Y = e @ Xf, e @ Yf
    gam, dgam = christoffel_jet(G, dG, d2G)
    R = riemann_from_jet(G, dG, d2G)

    # ambient covariant derivatives of S_hat: DS[c, a, b] and D2S[d, c, a, b]
    DS = dSh - np.einsum("kca,kb->cab", gam, Sh) - np.einsum("kcb,ak->cab", gam, Sh)
    dDS = (d2Sh
           - np.einsum("dkca,kb->dcab", dgam, Sh) - np.einsum("kca,dkb->dcab", gam, dSh)
           - np.einsum("dkcb,ak->dcab", dgam, Sh) - np.einsum("kcb,dak->dcab", gam, dSh))
    D2S = (dDS - np.einsum("kdc,kab->dcab", gam, DS)
           - np.einsum("kda,ckb->dcab", gam, DS) - np.einsum("kdb,cak->dcab", gam, DS))

    II_X = np.einsum("lka,k->la", II, Xf)  # II(e_l, X)
    II_Y = np.einsum("lka,k->la", II, Yf)
    S_tan = e.T @ Sh @ e  # S(e_k, e_l)
    SY = S_tan @ Yf
    SX = S_tan @ Xf
    sigma = np.linalg.inv(G)
    curv_X = np.einsum("abcd,al,b,cl->d", R, e, X, e)  # sum_l Rhat(e_l, X, e_l, .)
    curv_Y = np.einsum("abcd,al,b,cl->d", R, e, Y, e)

    terms = {
        "ambient_hessian": float(np.einsum("dcab,dl,cl,a,b->", D2S, e, e, X, Y)),
        "dS_II_X": 2.0 * float(np.einsum("cab,cl,la,b->", DS, e, II_X, Y)),
        "dS_II_Y": 2.0 * float(np.einsum("cab,cl,a,lb->", DS, e, X, II_Y)),
        "S_II_II": 2.0 * float(np.einsum("la,ab,lb->", II_X, Sh, II_Y)),
        "gII_S_X": -float(np.einsum("la,ab,lkb,k->", II_X, G, II, SY)),
        "gII_S_Y": -float(np.einsum("la,ab,lkb,k->", II_Y, G, II, SX)),
        "sigma_curvature": -float(curv_X @ sigma @ Sh @ Y) - float(curv_Y @ sigma @ Sh @ X),
        "tangential_curvature": float((curv_X @ e) @ SY) + float((curv_Y @ e) @ SX),
    }
    return terms


def elliptic_identity_residual(chart: GraphChart, geometry: Geometry, S_hat: MetricField | None,
                               x0, X=None, Y=None, *, strict: bool = True,
                               ambient_step: float | None = None) -> IdentityReport:
    """Compare ``(Delta S)(X, Y)`` with the sum of the eight right-hand groups.

    ``X``/``Y`` are frame directions (default ``e_n``, the top eigenvector of
    ``S``). The identity presumes a maximal graph: when ``|H|`` (S_hat-norm) is
    at least ``10 * chart.step`` this raises :class:`MeanCurvatureTooLarge`,
    or with ``strict=False`` records ``H_ok=False`` and continues.
    """
    S_hat = geometry.S_hat if S_hat is None else S_hat
    x0 = chart.resolve(x0)
    frame = induced_frame(chart, geometry, x0, S_hat=S_hat)
    sff = second_fundamental_form(chart, geometry, x0, frame=frame, ambient_step=ambient_step)
    p0 = frame.p
    H = np.einsum("lla->a", sff.vectors)
    Sa = S_hat.eval(p0)
    H_norm = float(np.sqrt(max(H @ Sa @ H, 0.0)))
    H_ok = H_norm < H_FACTOR * chart.step
    if strict and not H_ok:
        raise MeanCurvatureTooLarge(
            f"|H| = {H_norm:.3e} exceeds {H_FACTOR:g} x step = {H_FACTOR * chart.step:.3e}")
    Xf, Yf = _direction(frame, X), _direction(frame, Y)
    lap = intrinsic_laplacian(chart, geometry, S_hat, x0)
    Xc, Yc = frame.coeffs @ Xf, frame.coeffs @ Yf
    lhs = float(Xc @ lap @ Yc)
    terms = rhs_terms(frame, sff.vectors, geometry.g_hat.jet(p0, ambient_step),
                      S_hat.jet(p0, ambient_step), Xf, Yf)
    residual = abs(lhs - sum(terms.values()))
    return IdentityReport(x0, lhs, terms, residual, chart.step, H_norm, H_ok, Xf, Yf)

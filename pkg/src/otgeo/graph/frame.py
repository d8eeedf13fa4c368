"""Adapted frames, second fundamental form and mean curvature of a graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from ..errors import FrameDegeneracy, NotSpacelike
from ..geometry.curvature import christoffel
from ..geometry.metrics import Geometry, chi
from .chart import GraphChart

FRAME_TOL = 1e-8
PIVOT_TOL = 1e-12


@dataclass
class GraphFrame:
    """Tangent/normal frames at one point of the graph.

    Columns of ``e`` are g_hat-orthonormal tangent vectors ordered so that
    ``S(e_n, e_n)`` is the largest eigenvalue; ``e_perp`` columns satisfy
    ``g_hat(e_p, e_q) = -delta_pq``. ``coeffs`` expresses ``e = T @ coeffs``.
    """

    x: np.ndarray
    p: np.ndarray
    T: np.ndarray
    coeffs: np.ndarray
    e: np.ndarray
    e_perp: np.ndarray
    g: np.ndarray
    S: np.ndarray
    mus: np.ndarray
    lambdas: np.ndarray | None = None
    xi: np.ndarray | None = None
    xibar: np.ndarray | None = None
    residuals: dict = field(default_factory=dict)

    @property
    def mu_max(self) -> float:
        return float(self.mus[-1])


def _hyperbolic_normals(G, e, seeds, tol=PIVOT_TOL):
    """Orthonormalize ``seeds`` (columns) against ``e`` into a normal frame with g_hat = -I."""
    m = G.shape[0] - e.shape[1]
    normals = []
    pool = [s.copy() for s in seeds.T]
    for _ in range(m):
        best, best_norm = None, -np.inf
        for k, v in enumerate(pool):
            w = v - e @ (e.T @ G @ v)
            for nv in normals:
                w = w + (w @ G @ nv) * nv
            norm2 = -(w @ G @ w)
            if norm2 > best_norm:
                best, best_norm, best_vec = k, norm2, w
        if best is None or best_norm <= tol * max(1.0, float(np.max(np.abs(pool[best])) ** 2)):
            raise FrameDegeneracy(f"normal Gram-Schmidt pivot {best_norm:.3e} below tolerance")
        normals.append(best_vec / np.sqrt(best_norm))
        pool.pop(best)
    return np.column_stack(normals)


def induced_frame(chart: GraphChart, geometry: Geometry, x0, S_hat=None) -> GraphFrame:
    """Frame at ``(x0, F(x0))``.

    With the cost-induced S_hat, the tangent frame is
    ``e_i = (2 lam_i)^(-1/2) (xi_i + lam_i xibar_i)`` built from the eigenpairs
    of ``A = chi B`` with respect to ``h``. Otherwise (or when a different
    ``S_hat`` is passed) it is the g-orthonormal eigenbasis of ``S``.
    """
    S_field = geometry.S_hat if S_hat is None else S_hat
    cost_frame = geometry.standard_S and S_field is geometry.S_hat
    x0 = chart.resolve(x0)
    n = chart.dim
    p0 = chart.lift(x0)
    T = chart.tangent_basis(x0)
    G = geometry.g_hat.eval(p0)
    Sa = S_field.eval(p0)
    g = T.T @ G @ T
    g = 0.5 * (g + g.T)
    S = T.T @ Sa @ T
    S = 0.5 * (S + S.T)
    wg = np.linalg.eigvalsh(g)
    if wg[0] <= 0:
        raise NotSpacelike(f"induced metric has eigenvalue {wg[0]:.3e} at x={x0.tolist()}")

    lambdas = xi = xibar = None
    if cost_frame:
        model = geometry.model
        DF = T[n:, :]
        M = model.mixed(x0, p0[n:])
        B = -M @ DF
        A = chi(model, geometry.dens, x0, p0[n:], check=False) * 0.5 * (B + B.T)
        lam, vec = eigh(A, model.h)
        if lam[0] <= 0:
            raise NotSpacelike(f"A has eigenvalue {lam[0]:.3e} at x={x0.tolist()}")
        mus = 0.5 * (lam + 1 / lam)
        order = np.argsort(mus, kind="stable")
        lam, vec, mus = lam[order], vec[:, order], mus[order]
        lambdas, xi = lam, vec
        xibar = DF @ vec / lam
        coeffs = vec / np.sqrt(2 * lam)
        seeds = np.vstack([vec, -DF @ vec]) / np.sqrt(2 * lam)
    else:
        mus, coeffs = eigh(S, g)
        seeds = np.eye(2 * n)
    e = T @ coeffs
    e_perp = _hyperbolic_normals(G, e, seeds)
    frame = GraphFrame(x0, p0, T, coeffs, e, e_perp, g, S, mus, lambdas, xi, xibar)
    I = np.eye(n)
    frame.residuals = {
        "tangent_orthonormal": float(np.max(np.abs(e.T @ G @ e - I))),
        "mixed_orthogonal": float(np.max(np.abs(e.T @ G @ e_perp))),
        "normal_orthonormal": float(np.max(np.abs(e_perp.T @ G @ e_perp + I))),
        "S_diagonal": float(np.max(np.abs(e.T @ Sa @ e - np.diag(mus)))),
    }
    return frame


@dataclass
class SecondFundamentalForm:
    """``II`` at one point.

    ``chart_vectors[i, j]`` is ``II(T_i, T_j)`` as an ambient vector;
    ``vectors[k, l]`` is ``II(e_k, e_l)``; ``coeffs[k, l, p] = -g_hat(II(e_k, e_l), e_perp_p)``.
    """

    frame: GraphFrame
    chart_vectors: np.ndarray
    vectors: np.ndarray
    coeffs: np.ndarray
    symmetry_residual: float
    normality_residual: float


def ambient_christoffel(geometry: Geometry, p, step: float | None = None) -> np.ndarray:
    G, dG, _ = geometry.g_hat.jet(p, step)
    return christoffel(G, dG)


def second_fundamental_form(chart: GraphChart, geometry: Geometry, x0,
                            frame: GraphFrame | None = None,
                            ambient_step: float | None = None) -> SecondFundamentalForm:
    """Normal part of ``Dhat_{T_i} T_j = (0, d_ij F) + Gamma(T_i, T_j)``."""
    frame = frame or induced_frame(chart, geometry, x0)
    n = chart.dim
    x0 = frame.x
    T, p0 = frame.T, frame.p
    G = geometry.g_hat.eval(p0)
    gamma = ambient_christoffel(geometry, p0, ambient_step)
    D2F = chart.D2F(x0)
    V = np.einsum("abc,bi,cj->ija", gamma, T, T)
    V[:, :, n:] += D2F
    ginv = np.linalg.inv(frame.g)
    tangential = np.einsum("ija,ab,bk,kl,ml->ijm", V, G, T, ginv, T)
    II_chart = V - tangential
    C = frame.coeffs
    II = np.einsum("ik,jl,ija->kla", C, C, II_chart)
    coeffs = -np.einsum("kla,ab,bp->klp", II, G, frame.e_perp)
    scale = max(1.0, float(np.max(np.abs(II))))
    sym = float(np.max(np.abs(II - II.transpose(1, 0, 2)))) / scale
    normal = float(np.max(np.abs(np.einsum("kla,ab,bm->klm", II, G, frame.e)))) / scale
    return SecondFundamentalForm(frame, II_chart, II, coeffs, sym, normal)


def mean_curvature(chart: GraphChart, geometry: Geometry, x0, **kw) -> np.ndarray:
    sff = second_fundamental_form(chart, geometry, x0, **kw)
    return np.einsum("lla->a", sff.vectors)


def mean_curvature_residual(chart: GraphChart, geometry: Geometry, x0, **kw) -> float:
    """``|H|`` measured with S_hat, where ``H`` is the trace of ``II``."""
    sff = second_fundamental_form(chart, geometry, x0, **kw)
    H = np.einsum("lla->a", sff.vectors)
    Sa = geometry.S_hat.eval(sff.frame.p)
    return float(np.sqrt(max(H @ Sa @ H, 0.0)))

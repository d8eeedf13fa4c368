"""Levi-Civita connection and Riemann tensor of a metric field.

Sign convention: ``Rhat(X, Y, Z, W) = -g(D_X D_Y Z - D_Y D_X Z - D_[X,Y] Z, W)``,
so ``Rhat(X, Y, X, Y) > 0`` on a round sphere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SingularMetric
from .metrics import MetricField


@dataclass
class CurvatureSample:
    point: np.ndarray
    riemann: np.ndarray
    stencil_h: float | None

    def symmetry_residuals(self) -> dict[str, float]:
        R = self.riemann
        scale = max(1.0, float(np.max(np.abs(R))))
        return {
            "antisym_ab": float(np.max(np.abs(R + R.transpose(1, 0, 2, 3)))) / scale,
            "antisym_cd": float(np.max(np.abs(R + R.transpose(0, 1, 3, 2)))) / scale,
            "pair": float(np.max(np.abs(R - R.transpose(2, 3, 0, 1)))) / scale,
            "bianchi": float(np.max(np.abs(R + R.transpose(0, 2, 3, 1)
                                           + R.transpose(0, 3, 1, 2)))) / scale,
        }


def _inverse(G):
    try:
        Ginv = np.linalg.inv(G)
    except np.linalg.LinAlgError as exc:
        raise SingularMetric("metric is singular") from exc
    if not np.all(np.isfinite(Ginv)):
        raise SingularMetric("metric is singular")
    return Ginv


def christoffel(G, dG) -> np.ndarray:
    """``Gamma[e, b, c]`` from a metric and its first derivatives."""
    Ginv = _inverse(G)
    low = 0.5 * (np.einsum("bfc->fbc", dG) + np.einsum("cfb->fbc", dG) - dG)
    return np.einsum("ef,fbc->ebc", Ginv, low)


def christoffel_jet(G, dG, d2G):
    """Christoffel symbols and their derivatives ``dGamma[a, e, b, c]``."""
    Ginv = _inverse(G)
    low = 0.5 * (np.einsum("bfc->fbc", dG) + np.einsum("cfb->fbc", dG) - dG)
    dlow = 0.5 * (np.einsum("abfc->afbc", d2G) + np.einsum("acfb->afbc", d2G)
                  - np.einsum("afbc->afbc", d2G))
    dGinv = -np.einsum("ep,apq,qf->aef", Ginv, dG, Ginv)
    gamma = np.einsum("ef,fbc->ebc", Ginv, low)
    dgamma = np.einsum("aef,fbc->aebc", dGinv, low) + np.einsum("ef,afbc->aebc", Ginv, dlow)
    return gamma, dgamma


def riemann_from_jet(G, dG, d2G) -> np.ndarray:
    """``Rhat[a, b, c, d] = Rhat(d_a, d_b, d_c, d_d)`` from a metric jet."""
    gamma, dgamma = christoffel_jet(G, dG, d2G)
    # R(d_a, d_b) d_c = Rup[e, c, a, b] d_e
    Rup = (np.einsum("aebc->ecab", dgamma) - np.einsum("beac->ecab", dgamma)
           + np.einsum("eaf,fbc->ecab", gamma, gamma) - np.einsum("ebf,fac->ecab", gamma, gamma))
    return -np.einsum("de,ecab->abcd", G, Rup)


def riemann_curvature(field: MetricField, p, stencil_h: float | None = None) -> CurvatureSample:
    """Riemann tensor of ``field`` at ``p``.

    With ``stencil_h=None`` the field's analytic jet is used when it has one;
    otherwise metric derivatives come from 4th-order centered differences with
    step ``stencil_h`` (default 1e-3).
    """
    p = np.asarray(p, dtype=float)
    G, dG, d2G = field.jet(p, stencil_h)
    d2G = 0.5 * (d2G + np.swapaxes(d2G, 0, 1))
    used_fd = stencil_h is not None or field.jet_fn is None
    step = (stencil_h or 1e-3) if used_fd else None
    return CurvatureSample(p, riemann_from_jet(G, dG, d2G), step)


def sectional(R: np.ndarray, X, Y, Z, W) -> float:
    return float(np.einsum("abcd,a,b,c,d->", R, X, Y, Z, W))

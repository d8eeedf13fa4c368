"""Conformal factor, the cost-induced pseudo-metric g_hat and the Riemannian metric S_hat.

Metric components are always expressed in the product chart ``p = (x, xbar)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import fd
from ..errors import DegenerateCost, SingularMetric
from .costs import CostModel
from .densities import DensityPair


@dataclass
class MetricField:
    """Symmetric bilinear form field on the product chart.

    ``jet_fn(p)`` (optional) returns ``(G, dG, d2G)`` with ``dG[a] = dG/dp_a``.
    """

    eval_fn: Callable[[np.ndarray], np.ndarray]
    signature: tuple[int, int]
    label: str
    jet_fn: Callable | None = None

    def eval(self, p) -> np.ndarray:
        return self.eval_fn(np.asarray(p, dtype=float))

    __call__ = eval

    def jet(self, p, step: float | None = None):
        """Analytic jet when available and ``step`` is None, else 4th-order FD."""
        p = np.asarray(p, dtype=float)
        if step is None and self.jet_fn is not None:
            return self.jet_fn(p)
        return fd.field_jet(self.eval_fn, p, 1e-3 if step is None else step)

    def inverse(self, p) -> np.ndarray:
        G = self.eval(p)
        try:
            inv = np.linalg.inv(G)
        except np.linalg.LinAlgError as exc:
            raise SingularMetric(f"{self.label} is singular at {np.asarray(p).tolist()}") from exc
        if not np.all(np.isfinite(inv)):
            raise SingularMetric(f"{self.label} is singular at {np.asarray(p).tolist()}")
        return inv

    def observed_signature(self, p) -> tuple[int, int]:
        w = np.linalg.eigvalsh(self.eval(p))
        return int(np.sum(w > 0)), int(np.sum(w < 0))

    def scaled(self, factor: float) -> "MetricField":
        jet = None
        if self.jet_fn is not None:
            inner = self.jet_fn
            jet = lambda p: tuple(factor * t for t in inner(p))
        return MetricField(lambda p: factor * self.eval_fn(p), self.signature, self.label, jet)


def _split(model: CostModel, p):
    p = np.asarray(p, dtype=float)
    return p[: model.dim], p[model.dim:]


def cross_hessian(model: CostModel, x, xbar, check: bool = True) -> np.ndarray:
    """Mixed Hessian ``d2c/dx^i dxbar^k``; raises if it is degenerate."""
    if check:
        model.check_point(x, xbar)
    M = model.mixed(x, xbar)
    if abs(np.linalg.det(M)) < model.a2_tol:
        raise DegenerateCost(f"|det d2c/dx dxbar| < {model.a2_tol:g} at x={np.asarray(x).tolist()}, "
                             f"xbar={np.asarray(xbar).tolist()}")
    return M


def chi(model: CostModel, dens: DensityPair, x, xbar, check: bool = True) -> float:
    """Positive conformal factor with ``chi^n |det M| = rho(x) rho_bar(xbar)``."""
    M = cross_hessian(model, x, xbar, check)
    log_chi = (dens.rho.log_value(x) + dens.rho_bar.log_value(xbar)
               - np.log(abs(np.linalg.det(M)))) / model.dim
    return float(np.exp(log_chi))


def chi_jet(model: CostModel, dens: DensityPair, p):
    """``chi`` with its first and second derivatives in ``p``, plus the mixed-Hessian jet."""
    n = model.dim
    x, xbar = _split(model, p)
    M, dM, d2M = model.mixed_jet(x, xbar)
    det = np.linalg.det(M)
    if abs(det) < model.a2_tol:
        raise DegenerateCost(f"|det d2c/dx dxbar| < {model.a2_tol:g} at p={np.asarray(p).tolist()}")
    Minv = np.linalg.inv(M)
    L = (dens.rho.log_value(x) + dens.rho_bar.log_value(xbar) - np.log(abs(det))) / n
    dlogrho = np.concatenate([dens.rho.grad_log(x), dens.rho_bar.grad_log(xbar)])
    hlogrho = np.zeros((2 * n, 2 * n))
    hlogrho[:n, :n] = dens.rho.hess_log(x)
    hlogrho[n:, n:] = dens.rho_bar.hess_log(xbar)
    MinvdM = np.einsum("ij,ajk->aik", Minv, dM)
    dL = (dlogrho - np.einsum("aii->a", MinvdM)) / n
    d2L = (hlogrho - np.einsum("ij,abji->ab", Minv, d2M)
           + np.einsum("aij,bji->ab", MinvdM, MinvdM)) / n
    c = float(np.exp(L))
    dc = c * dL
    d2c = c * (d2L + np.outer(dL, dL))
    return c, dc, d2c, M, dM, d2M


def _offdiag(M: np.ndarray) -> np.ndarray:
    """Block matrix ``[[0, M], [M^T, 0]]`` (batched over leading axes)."""
    n = M.shape[-1]
    out = np.zeros(M.shape[:-2] + (2 * n, 2 * n))
    out[..., :n, n:] = M
    out[..., n:, :n] = np.swapaxes(M, -1, -2)
    return out


def kmw_metric(model: CostModel, dens: DensityPair) -> MetricField:
    """Pseudo-metric ``-chi * c_{x xbar}`` (symmetrized), signature ``(n, n)``."""
    n = model.dim

    def eval_fn(p):
        x, xbar = _split(model, p)
        return -chi(model, dens, x, xbar, check=False) * _offdiag(cross_hessian(model, x, xbar, False))

    def jet_fn(p):
        c, dc, d2c, M, dM, d2M = chi_jet(model, dens, p)
        PM, PdM, Pd2M = _offdiag(M), _offdiag(dM), _offdiag(d2M)
        G = -c * PM
        dG = -(dc[:, None, None] * PM + c * PdM)
        d2G = -(d2c[:, :, None, None] * PM
                + dc[:, None, None, None] * PdM[None]
                + dc[None, :, None, None] * PdM[:, None]
                + c * Pd2M)
        return G, dG, d2G

    return MetricField(eval_fn, (n, n), "g_hat", jet_fn)


def h_bar(model: CostModel, dens: DensityPair, x, xbar) -> np.ndarray:
    """Target-side metric ``chi^2 M^T h^{-1} M``."""
    M = cross_hessian(model, x, xbar, check=False)
    c = chi(model, dens, x, xbar, check=False)
    Q = M.T @ np.linalg.solve(model.h, M)
    return c**2 * 0.5 * (Q + Q.T)


def s_hat_metric(model: CostModel, dens: DensityPair) -> MetricField:
    """Riemannian metric ``h + h_bar`` on the product, positive definite."""
    n = model.dim
    H = np.linalg.inv(model.h)

    def eval_fn(p):
        x, xbar = _split(model, p)
        S = np.zeros((2 * n, 2 * n))
        S[:n, :n] = model.h
        S[n:, n:] = h_bar(model, dens, x, xbar)
        return S

    def jet_fn(p):
        c, dc, d2c, M, dM, d2M = chi_jet(model, dens, p)
        Q = M.T @ H @ M
        Q = 0.5 * (Q + Q.T)
        HM = H @ M
        dQ = np.einsum("aki,kl->ail", dM, HM)
        dQ = dQ + np.swapaxes(dQ, 1, 2)
        d2Q = np.einsum("abki,kl->abil", d2M, HM)
        d2Q = d2Q + np.swapaxes(d2Q, 2, 3)
        cross = np.einsum("aki,kl,blj->abij", dM, H, dM)
        d2Q = d2Q + cross + np.swapaxes(cross, 0, 1)
        q, dq = c * c, 2 * c * dc
        d2q = 2 * (np.outer(dc, dc) + c * d2c)
        S = np.zeros((2 * n, 2 * n))
        S[:n, :n] = model.h
        S[n:, n:] = q * Q
        dS = np.zeros((2 * n,) * 3)
        dS[:, n:, n:] = dq[:, None, None] * Q + q * dQ
        d2S = np.zeros((2 * n,) * 4)
        d2S[:, :, n:, n:] = (d2q[:, :, None, None] * Q
                             + dq[:, None, None, None] * dQ[None]
                             + dq[None, :, None, None] * dQ[:, None]
                             + q * d2Q)
        return S, dS, d2S

    return MetricField(eval_fn, (2 * n, 0), "S_hat", jet_fn)


@dataclass
class Geometry:
    """Ambient data bundle: pseudo-metric, Riemannian companion and their source."""

    g_hat: MetricField
    S_hat: MetricField
    dim: int
    model: CostModel | None = None
    dens: DensityPair | None = None

    @property
    def standard_S(self) -> bool:
        return self.S_hat.label == "S_hat" and self.model is not None


def build_geometry(model: CostModel, dens: DensityPair) -> Geometry:
    return Geometry(kmw_metric(model, dens), s_hat_metric(model, dens), model.dim, model, dens)

"""Probability densities on boxes, with log-density derivatives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import RegularGridInterpolator

from .. import fd
from ..errors import ConfigInvalid, NonpositiveDensity
from .costs import as_box

DENSITY_KINDS = ("uniform", "gaussian_clipped", "table")


def box_quadrature(box: np.ndarray, nodes: int | None = None):
    """Tensor Gauss-Legendre nodes ``(m, n)`` and weights ``(m,)`` on a box."""
    n = box.shape[0]
    if nodes is None:
        nodes = {1: 256, 2: 96, 3: 32}.get(n, 12)
    t, w = leggauss(nodes)
    grids, weights = [], []
    for lo, hi in box:
        grids.append(0.5 * (hi - lo) * t + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * w)
    pts = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, n)
    wts = np.ones(1)
    for w_ax in weights:
        wts = np.multiply.outer(wts, w_ax)
    return pts, wts.reshape(-1)


@dataclass
class Density:
    """Positive density on ``box``; ``log_fn`` is an unnormalized log-density.

    With ``normalize=True`` the density is rescaled to unit mass on the box by
    quadrature. ``grad_fn``/``hess_fn`` give analytic log-density derivatives;
    when absent they are taken by finite differences.
    """

    box: np.ndarray
    log_fn: Callable[[np.ndarray], np.ndarray]
    kind: str = "custom"
    grad_fn: Callable | None = None
    hess_fn: Callable | None = None
    normalize: bool = True
    fd_step: float = 1e-3

    def __post_init__(self):
        self.box = np.asarray(self.box, dtype=float)
        self.dim = self.box.shape[0]
        self.log_norm = 0.0
        if self.normalize:
            pts, wts = box_quadrature(self.box)
            vals = np.exp(self.log_fn(pts))
            if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
                raise NonpositiveDensity(f"{self.kind} density is not strictly positive on its box")
            self.log_norm = float(np.log(wts @ vals))

    def log_value(self, x) -> np.ndarray:
        return self.log_fn(np.asarray(x, dtype=float)) - self.log_norm

    def value(self, x) -> np.ndarray:
        return np.exp(self.log_value(x))

    def grad_log(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad_fn is not None:
            return np.asarray(self.grad_fn(x), dtype=float)
        return fd.derivative_tensor(self.log_fn, x, 1, self.fd_step)

    def hess_log(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.hess_fn is not None:
            return np.asarray(self.hess_fn(x), dtype=float)
        return fd.derivative_tensor(self.log_fn, x, 2, self.fd_step * 10)

    def scaled(self, factor: Callable[[np.ndarray], np.ndarray] | float) -> "Density":
        """Multiply by a positive factor, without renormalizing."""
        if callable(factor):
            log_f = lambda x: self.log_value(x) + np.log(factor(x))
            return Density(self.box, log_f, self.kind, normalize=False, fd_step=self.fd_step)
        c = float(np.log(factor))
        base = self
        return Density(self.box, lambda x: base.log_value(x) + c, self.kind,
                       base.grad_fn, base.hess_fn, normalize=False, fd_step=self.fd_step)


@dataclass
class DensityPair:
    rho: Density
    rho_bar: Density


def make_density(kind: str, box, params: dict | None = None) -> Density:
    """Build a registered density kind on ``box``."""
    params = dict(params or {})
    box = np.asarray(box, dtype=float)
    n = box.shape[0]
    as_box(box, n)
    if kind == "uniform":
        return Density(box, lambda x: np.zeros(np.shape(x)[:-1]), kind,
                       grad_fn=lambda x: np.zeros(n), hess_fn=lambda x: np.zeros((n, n)))
    if kind == "gaussian_clipped":
        mean = np.asarray(params.get("mean", box.mean(axis=1)), dtype=float)
        if "cov" in params:
            cov = np.asarray(params["cov"], dtype=float)
        else:
            sigma = np.broadcast_to(np.asarray(params.get("sigma", 1.0), dtype=float), (n,))
            cov = np.diag(sigma**2)
        if cov.shape != (n, n) or np.linalg.eigvalsh(cov)[0] <= 0:
            raise ConfigInvalid("gaussian_clipped needs a positive definite n x n covariance")
        prec = np.linalg.inv(cov)

        def log_fn(x):
            d = x - mean
            return -0.5 * np.einsum("...i,ij,...j->...", d, prec, d)

        return Density(box, log_fn, kind, grad_fn=lambda x: -prec @ (x - mean),
                       hess_fn=lambda x: -prec)
    if kind == "table":
        try:
            axes = [np.asarray(a, dtype=float) for a in params["axes"]]
            values = np.asarray(params["values"], dtype=float)
        except KeyError as exc:
            raise ConfigInvalid(f"table density needs {exc.args[0]!r}") from exc
        if len(axes) != n or values.shape != tuple(a.size for a in axes):
            raise ConfigInvalid("table density: need n axes and a matching value grid")
        if np.any(values <= 0):
            raise NonpositiveDensity("table density has nonpositive entries")
        interp = RegularGridInterpolator(axes, np.log(values), method=params.get("method", "cubic"),
                                         bounds_error=False, fill_value=None)

        def log_fn(x):
            x = np.asarray(x, dtype=float)
            return interp(x.reshape(-1, n)).reshape(x.shape[:-1])

        return Density(box, log_fn, kind)
    raise ConfigInvalid(f"unknown density kind {kind!r}; expected one of {DENSITY_KINDS}")

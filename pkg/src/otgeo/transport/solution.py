"""Transport solutions and the maps/potentials extracted from them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.special import logsumexp

from ..fd import central_gradient
from .measures import DiscreteMeasure


@dataclass
class TransportSolution:
    """Discrete optimal plan with dual potentials.

    Duals follow ``u_i + ubar_j + c_ij >= 0`` with equality on the support.
    ``F`` holds one map sample per source atom (the target atom for permutation
    plans, the row barycenter otherwise).
    """

    source: DiscreteMeasure
    target: DiscreteMeasure
    plan: sparse.csr_array
    u: np.ndarray
    u_bar: np.ndarray
    F: np.ndarray
    method: str
    objective: float
    dual_objective: float
    eps_schedule: tuple[float, ...] = ()
    row_entropy: np.ndarray | None = None
    sharp: np.ndarray | None = None
    cost: object = None
    info: dict = field(default_factory=dict)

    @property
    def eps(self) -> float | None:
        return self.eps_schedule[-1] if self.eps_schedule else None

    @property
    def duality_gap(self) -> float:
        return self.objective - self.dual_objective

    def marginal_residual(self) -> float:
        P = self.plan
        return float(max(np.abs(P.sum(axis=1) - self.source.weights).sum(),
                         np.abs(P.sum(axis=0) - self.target.weights).sum()))

    @property
    def grid_step(self) -> float:
        return float(np.min(self.source.spacing))

    # -- smooth evaluation off the atoms (entropic solutions) ------------------
    def _soft_logits(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        C = self.cost.cost_matrix(x, self.target.points)
        return np.log(self.target.weights)[None, :] - (C + self.u_bar[None, :]) / self.eps

    def soft_potential(self, x):
        """Entropic c-transform ``u(x) = eps * log sum_j b_j exp(-(ubar_j + c(x, xbar_j)) / eps)``."""
        single = np.ndim(x) == 1
        out = self.eps * logsumexp(self._soft_logits(x), axis=1)
        return out[0] if single else out

    def soft_map(self, x):
        """Barycentric map of the entropic kernel at arbitrary source points."""
        single = np.ndim(x) == 1
        logits = self._soft_logits(x)
        w = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
        out = w @ self.target.points
        return out[0] if single else out

    def map_function(self):
        """Callable ``x -> F(x)``: entropic barycenter if available, else grid interpolation."""
        if self.method == "sinkhorn" and self.cost is not None:
            return self.soft_map
        return self._grid_interpolant(self.F)

    def potential_function(self):
        if self.method == "sinkhorn" and self.cost is not None:
            return self.soft_potential
        return self._grid_interpolant(self.u)

    def _grid_interpolant(self, values):
        src = self.source
        vals = np.asarray(values).reshape(tuple(src.shape) + np.shape(values)[1:])
        interp = RegularGridInterpolator(src.axes, vals, method="linear", bounds_error=False,
                                         fill_value=None)

        def f(x):
            x = np.asarray(x, dtype=float)
            out = interp(np.atleast_2d(x))
            return out[0] if x.ndim == 1 else out

        return f

    def jacobian(self) -> np.ndarray:
        """Centered-difference ``dF^k/dx^j`` at interior source atoms (NaN elsewhere)."""
        src = self.source
        n = src.dim
        out = np.full((len(src), n, n), np.nan)
        Fmap = self.map_function()
        step = src.spacing
        for i in np.flatnonzero(src.interior_mask()):
            x = src.points[i]
            cols = [(Fmap(x + step[j] * e) - Fmap(x - step[j] * e)) / (2 * step[j])
                    for j, e in enumerate(np.eye(n))]
            out[i] = np.stack(cols, axis=1)
        return out

    def map_derivative(self, x, step: float | None = None) -> np.ndarray:
        """``DF[k, j] = dF^k/dx^j`` at ``x`` by centered differences."""
        step = self.grid_step if step is None else step
        return central_gradient(self.map_function(), x, step).T

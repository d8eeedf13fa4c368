"""The graph of a transport map, parametrized by the source coordinates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import StencilOutOfDomain
from ..fd import central_gradient, central_hessian
from ..geometry.costs import in_box
from ..transport.measures import DiscreteMeasure
from ..transport.solution import TransportSolution


@dataclass
class GraphChart:
    """``x -> (x, F(x))`` with derivatives of ``F`` by centered differences at ``step``.

    ``domain`` (optional box) is where ``map_fn`` may be evaluated; stencils
    leaving it raise :class:`StencilOutOfDomain`.
    """

    map_fn: Callable[[np.ndarray], np.ndarray]
    step: float
    dim: int
    base: DiscreteMeasure | None = None
    domain: np.ndarray | None = None

    @classmethod
    def from_solution(cls, sol: TransportSolution, step: float | None = None) -> "GraphChart":
        src = sol.source
        return cls(sol.map_function(), sol.grid_step if step is None else step, src.dim, src, src.box)

    def resolve(self, x) -> np.ndarray:
        """Grid multi-index (integers) or coordinates to coordinates."""
        x = np.asarray(x)
        if x.dtype.kind in "iu":
            if self.base is None:
                raise ValueError("grid indices need a chart with a base grid")
            if x.ndim == 0:
                return self.base.points[int(x)]
            return self.base.points[self.base.flat_index(x)]
        return x.astype(float)

    def F(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.domain is not None and not in_box(self.domain, x, tol=1e-9):
            raise StencilOutOfDomain(f"map evaluated outside its domain at {x.tolist()}")
        return np.asarray(self.map_fn(x), dtype=float)

    def lift(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.concatenate([x, self.F(x)])

    def DF(self, x, step: float | None = None) -> np.ndarray:
        """``DF[k, j] = dF^k / dx^j``."""
        return central_gradient(self.F, x, self.step if step is None else step).T

    def D2F(self, x, step: float | None = None) -> np.ndarray:
        """``D2F[i, j, k] = d2F^k / dx^i dx^j``."""
        return central_hessian(self.F, x, self.step if step is None else step)

    def tangent_basis(self, x, step: float | None = None) -> np.ndarray:
        """Columns ``T_i = d_i + sum_k dF^k/dx^i dbar_k``, shape ``(2n, n)``."""
        return np.vstack([np.eye(self.dim), self.DF(x, step)])

    def restricted(self, field, x, step: float | None = None) -> np.ndarray:
        """Pullback of an ambient bilinear form to the chart, ``T^T G T``."""
        T = self.tangent_basis(x, step)
        return T.T @ field.eval(self.lift(x)) @ T


def affine_chart(L, b=None, step: float = 1e-2) -> GraphChart:
    """Graph of ``x -> L x + b``."""
    L = np.asarray(L, dtype=float)
    b = np.zeros(L.shape[0]) if b is None else np.asarray(b, dtype=float)
    return GraphChart(lambda x: L @ np.asarray(x, float) + b, step, L.shape[0])

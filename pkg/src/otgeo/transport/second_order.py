"""Second-order optimality data along an extracted transport map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from ..errors import NonInjectiveMap
from ..fd import central_hessian
from ..geometry.costs import CostModel
from ..geometry.densities import DensityPair
from ..geometry.metrics import chi
from .solution import TransportSolution


@dataclass
class SecondOrderData:
    x: np.ndarray
    Fx: np.ndarray
    DF: np.ndarray
    B: np.ndarray
    A: np.ndarray
    chi: float
    lambdas: np.ndarray
    eigvecs: np.ndarray
    asymmetry: float


def resolve_point(sol: TransportSolution, x) -> np.ndarray:
    """Accept a flat atom index, a grid multi-index, or coordinates."""
    if np.isscalar(x) and float(x).is_integer() and not isinstance(x, float):
        return sol.source.points[int(x)]
    x = np.asarray(x)
    if x.dtype.kind in "iu":
        return sol.source.points[sol.source.flat_index(x)]
    return x.astype(float)


def second_order_data(model: CostModel, dens: DensityPair, sol: TransportSolution, x,
                      step: float | None = None, det_tol: float = 1e-10) -> SecondOrderData:
    """``B = -c_{x xbar} DF`` (symmetrized), ``A = chi B`` and its eigenvalues w.r.t. ``h``."""
    x = resolve_point(sol, x)
    Fx = np.asarray(sol.map_function()(x), dtype=float)
    DF = sol.map_derivative(x, step)
    if abs(np.linalg.det(DF)) < det_tol:
        raise NonInjectiveMap(f"singular map Jacobian at x={x.tolist()}")
    M = model.mixed(x, Fx)
    B_raw = -M @ DF
    B = 0.5 * (B_raw + B_raw.T)
    c = chi(model, dens, x, Fx, check=False)
    A = c * B
    lam, vec = eigh(A, model.h)
    asym = float(np.linalg.norm(B_raw - B_raw.T) / max(np.linalg.norm(B_raw), 1e-300))
    return SecondOrderData(x, Fx, DF, B, A, c, lam, vec, asym)


def soc_matrix(model: CostModel, sol: TransportSolution, x, step: float | None = None) -> np.ndarray:
    """``B`` from second differences of the dual potential plus ``c_xx`` at ``(x, F(x))``."""
    x = resolve_point(sol, x)
    step = sol.grid_step if step is None else step
    Fx = np.asarray(sol.map_function()(x), dtype=float)
    return central_hessian(sol.potential_function(), x, step) + model.hess_xx(x, Fx)


def check_det_identity(data: SecondOrderData, dens: DensityPair, h, x=None) -> float:
    """Relative residual ``|det(h^-1 A) - (rho / vol_h)^2| / (rho / vol_h)^2``.

    ``rho`` is the coordinate density, so ``rho / vol_h = rho / sqrt(det h)``.
    """
    x = data.x if x is None else np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    target = float(dens.rho.value(x)) ** 2 / np.linalg.det(h)
    return float(abs(np.linalg.det(np.linalg.solve(h, data.A)) - target) / target)

"""Exact discrete optimal transport with certified dual potentials."""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog

from ..errors import InfeasibleMarginals, SolverStall
from .measures import DiscreteMeasure
from .solution import TransportSolution

SUPPORT_TOL = 1e-13


def dual_potentials(C: np.ndarray, rows: np.ndarray, cols: np.ndarray):
    """Potentials with ``u_i + ubar_j + C_ij >= 0`` and equality on ``(rows, cols)``.

    Shortest paths (Bellman-Ford from a virtual root) on the graph with edges
    ``i -> j`` of weight ``C_ij`` for every pair and ``j -> i`` of weight
    ``-C_ij`` on the support. A negative cycle means the support is not
    optimal.
    """
    N, M = C.shape
    u = np.zeros(N)
    w = np.zeros(M)  # w = -ubar
    c_sup = C[rows, cols]
    # roundoff-level cycles must not keep the relaxation alive
    atol = 1e-14 * (1.0 + float(np.max(np.abs(C))))
    for _ in range(N + M + 2):
        w_new = np.minimum(w, (u[:, None] + C).min(axis=0))
        u_new = u.copy()
        np.minimum.at(u_new, rows, w_new[cols] - c_sup)
        if max(np.max(u - u_new), np.max(w - w_new)) <= atol:
            shift = u_new.max()
            return u_new - shift, -(w_new - shift)
        u, w = u_new, w_new
    raise SolverStall("dual recovery did not converge (support is not optimal)")


def _uniform_weights(mu: DiscreteMeasure, nu: DiscreteMeasure) -> bool:
    return (len(mu) == len(nu)
            and np.ptp(mu.weights) <= 1e-14 * mu.weights.max()
            and np.ptp(nu.weights) <= 1e-14 * nu.weights.max())


def solve_exact(cost_matrix, mu: DiscreteMeasure, nu: DiscreteMeasure, cost=None) -> TransportSolution:
    """Optimal plan by assignment (equal uniform weights) or by linear programming."""
    C = np.asarray(cost_matrix, dtype=float)
    a, b = mu.weights, nu.weights
    if C.shape != (len(a), len(b)):
        raise ValueError(f"cost matrix shape {C.shape} does not match measures ({len(a)}, {len(b)})")
    if abs(a.sum() - b.sum()) > 1e-12:
        raise InfeasibleMarginals(f"total masses differ: {a.sum():.17g} vs {b.sum():.17g}")
    if _uniform_weights(mu, nu):
        rows, cols = linear_sum_assignment(C)
        mass = a[rows]
        info = {"regime": "assignment"}
    else:
        N, M = C.shape
        A_eq = sparse.vstack([sparse.kron(sparse.eye(N), np.ones((1, M))),
                              sparse.kron(np.ones((1, N)), sparse.eye(M))]).tocsr()
        res = linprog(C.ravel(), A_eq=A_eq, b_eq=np.r_[a, b], bounds=(0, None), method="highs-ds")
        if res.status != 0:
            raise SolverStall(f"linear program failed: {res.message}")
        x = res.x.reshape(N, M)
        rows, cols = np.nonzero(x > SUPPORT_TOL)
        mass = x[rows, cols]
        info = {"regime": "network_flow"}
    plan = sparse.csr_array((mass, (rows, cols)), shape=C.shape)
    u, u_bar = dual_potentials(C, rows, cols)
    F = (plan @ nu.points) / a[:, None]
    objective = float(np.sum(mass * C[rows, cols]))
    dual_objective = float(-(a @ u + b @ u_bar))
    return TransportSolution(mu, nu, plan, u, u_bar, F, "exact", objective, dual_objective,
                             cost=cost, info=info)

"""Entropic transport by log-domain Sinkhorn iterations with epsilon scaling."""

from __future__ import annotations

import logging

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from ..errors import ConfigInvalid, InfeasibleMarginals, NoConvergence, NumericalOverflow
from .measures import DiscreteMeasure
from .solution import TransportSolution

logger = logging.getLogger(__name__)

MARGINAL_TOL = 1e-6


ABSORB = 30.0  # |log scaling| above which scalings are folded into the potentials


def _log_sweep(C, loga, logb, u, u_bar, eps):
    u = eps * logsumexp(logb[None, :] - (u_bar[None, :] + C) / eps, axis=1)
    u_bar = eps * logsumexp(loga[:, None] - (u[:, None] + C) / eps, axis=0)
    return u, u_bar


def _scaling_stage(C, a, b, loga, logb, u, u_bar, eps, tol, max_iters):
    """Kernel-scaling iterations at fixed ``eps`` with absorption into ``(u, u_bar)``.

    The scalings ``s, t`` act on the stabilized kernel
    ``K = a b exp(-(u + u_bar + C) / eps)``; whenever they grow large (or a row
    of ``K`` underflows) they are absorbed and ``K`` is rebuilt.
    """
    def kernel():
        return np.exp(loga[:, None] + logb[None, :] - (u[:, None] + u_bar[None, :] + C) / eps)

    u, u_bar = _log_sweep(C, loga, logb, u, u_bar, eps)
    K = kernel()
    s, t = np.ones(len(a)), np.ones(len(b))
    err = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            s = a / (K @ t)
            t = b / (K.T @ s)
            ok = np.all(np.isfinite(s)) and np.all(np.isfinite(t)) and s.min() > 0 and t.min() > 0
            big = ok and max(np.abs(np.log(s)).max(), np.abs(np.log(t)).max()) > ABSORB
        if not ok:
            u, u_bar = _log_sweep(C, loga, logb, u, u_bar, eps)
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(u_bar))):
                raise NumericalOverflow(f"non-finite iterates at eps={eps:g}")
        elif big:
            u, u_bar = u - eps * np.log(s), u_bar - eps * np.log(t)
        if not ok or big:
            K = kernel()
            s, t = np.ones(len(a)), np.ones(len(b))
        if it % 10 == 0:
            err = float(np.abs(s * (K @ t) - a).sum())
            if not np.isfinite(err):
                raise NumericalOverflow(f"non-finite iterates at eps={eps:g}")
            if err < tol:
                break
    u, u_bar = u - eps * np.log(s), u_bar - eps * np.log(t)
    return u, u_bar, err, it


def solve_sinkhorn(cost_matrix, mu: DiscreteMeasure, nu: DiscreteMeasure, eps_schedule,
                   *, max_iters: int = 20000, tol: float = 1e-10, entropy_max: float | None = None,
                   cost=None) -> TransportSolution:
    """Entropic plan ``P_ij = a_i b_j exp(-(u_i + ubar_j + C_ij) / eps)``.

    Each entry of the decreasing ``eps_schedule`` is solved to an l1 marginal
    error of ``tol`` (warm-started from the previous stage). Rows whose
    conditional entropy exceeds ``entropy_max`` (default ``0.75 log M``) are
    flagged as not sharp.
    """
    C = np.asarray(cost_matrix, dtype=float)
    a, b = mu.weights, nu.weights
    schedule = tuple(float(e) for e in np.atleast_1d(eps_schedule))
    if not schedule or not all(np.isfinite(schedule)) or min(schedule) <= 0:
        raise ConfigInvalid("eps_schedule must be finite and positive")
    if any(e2 > e1 for e1, e2 in zip(schedule, schedule[1:])):
        raise ConfigInvalid("eps_schedule must be nonincreasing")
    if abs(a.sum() - b.sum()) > 1e-12:
        raise InfeasibleMarginals("total masses differ")
    loga, logb = np.log(a), np.log(b)
    u = np.zeros(len(a))
    u_bar = np.zeros(len(b))
    iters = []
    err = np.inf
    for stage, eps in enumerate(schedule):
        final = stage == len(schedule) - 1
        stage_tol = tol if final else max(tol, 1e-6)
        u, u_bar, err, n_it = _scaling_stage(C, a, b, loga, logb, u, u_bar, eps, stage_tol, max_iters)
        iters.append(n_it)
        if final and err > MARGINAL_TOL:
            raise NoConvergence(f"marginal error {err:.3e} after {max_iters} iterations at eps={eps:g}")
        if err > stage_tol:
            logger.warning("eps=%g stopped at marginal error %.3e", eps, err)

    eps = schedule[-1]
    logP = loga[:, None] + logb[None, :] - (u[:, None] + u_bar[None, :] + C) / eps
    P = np.exp(logP)
    rowsum = P.sum(axis=1)
    Q = P / rowsum[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = -np.sum(np.where(Q > 0, Q * np.log(Q), 0.0), axis=1)
    entropy_max = 0.75 * np.log(len(b)) if entropy_max is None else entropy_max
    F = Q @ nu.points
    objective = float(np.sum(P * C))
    # hard c-transform of ubar gives a feasible dual, hence a nonnegative gap
    u_feas = np.max(-(C + u_bar[None, :]), axis=1)
    dual_objective = float(-(a @ u_feas + b @ u_bar))
    P[P < 1e-300] = 0.0
    return TransportSolution(mu, nu, sparse.csr_array(P), u, u_bar, F, "sinkhorn", objective,
                             dual_objective, schedule, ent, ent <= entropy_max, cost,
                             {"iterations": iters, "marginal_error": err})

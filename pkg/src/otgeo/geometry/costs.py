"""Cost functions on a product of boxes, with derivatives up to order four.

A point of the product domain is written ``p = (x, xbar)`` with ``x`` first.
Derivative tensors are always taken with respect to all ``2n`` coordinates of
``p``; the mixed block ``d2c/dx^i dxbar^k`` is :meth:`CostModel.mixed`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .. import fd
from ..errors import ConfigInvalid, DomainError

COST_KINDS = ("bilinear", "quadratic", "log_distance", "sqrt_one_plus", "custom_table")


def as_box(box, dim: int) -> np.ndarray:
    arr = np.asarray(box, dtype=float)
    if arr.shape != (dim, 2) or np.any(arr[:, 1] <= arr[:, 0]):
        raise ConfigInvalid(f"box must be {dim} pairs [lo, hi] with lo < hi, got {box!r}")
    return arr


def in_box(box: np.ndarray, x, tol: float = 1e-12) -> bool:
    x = np.asarray(x, dtype=float)
    scale = tol * max(1.0, float(np.max(np.abs(box))))
    return bool(np.all(x >= box[:, 0] - scale) and np.all(x <= box[:, 1] + scale))


# -- radial difference costs c = phi(|x - xbar|^2) ----------------------------

@dataclass(frozen=True)
class _Radial:
    """Profile ``phi(s)`` with its first four derivatives."""

    derivs: Callable[[np.ndarray], tuple]

    def value(self, z):
        s = np.sum(z * z, axis=-1)
        return self.derivs(s)[0]

    def tensors(self, z, max_order):
        n = z.size
        s = float(z @ z)
        phi = self.derivs(np.asarray(s))
        I = np.eye(n)
        zz = np.outer(z, z)
        out = [2 * phi[1] * z]
        out.append(4 * phi[2] * zz + 2 * phi[1] * I)
        if max_order >= 3:
            dz = np.einsum("ij,k->ijk", I, z)
            sym3 = dz + dz.transpose(0, 2, 1) + dz.transpose(2, 1, 0)
            out.append(8 * phi[3] * np.einsum("i,j,k->ijk", z, z, z) + 4 * phi[2] * sym3)
        if max_order >= 4:
            dzz = np.einsum("ij,kl->ijkl", I, zz)
            sym6 = (dzz + dzz.transpose(0, 2, 1, 3) + dzz.transpose(0, 3, 2, 1)
                    + dzz.transpose(2, 1, 0, 3) + dzz.transpose(3, 1, 2, 0)
                    + dzz.transpose(2, 3, 0, 1))
            dd = np.einsum("ij,kl->ijkl", I, I)
            sym3d = dd + dd.transpose(0, 2, 1, 3) + dd.transpose(0, 3, 2, 1)
            out.append(16 * phi[4] * np.einsum("i,j,k,l->ijkl", z, z, z, z)
                       + 8 * phi[3] * sym6 + 4 * phi[2] * sym3d)
        return out[:max_order]


def _quadratic_profile(s):
    z = np.zeros_like(s)
    return (0.5 * s, 0.5 + z, z, z, z)


def _log_profile(s):
    # -log|z| = -log(s) / 2
    return (-0.5 * np.log(s), -0.5 / s, 0.5 / s**2, -1.0 / s**3, 3.0 / s**4)


def _sqrt_profile(s):
    t = 1.0 + s
    return (np.sqrt(t), 0.5 * t**-0.5, -0.25 * t**-1.5, 0.375 * t**-2.5, -0.9375 * t**-3.5)


_PROFILES = {
    "quadratic": _Radial(_quadratic_profile),
    "log_distance": _Radial(_log_profile),
    "sqrt_one_plus": _Radial(_sqrt_profile),
}


@dataclass
class CostModel:
    """Cost ``c(x, xbar)`` on ``domain_x x domain_xbar`` with reference metric ``h``.

    ``tensors`` (optional) returns the analytic derivative tensors of orders
    ``1..k`` with respect to ``p = (x, xbar)``. Without it, or with
    ``mode="fd"``, derivatives are synthesized by centered differences with
    per-order steps ``fd_base * 10**(k/4)`` and Richardson extrapolation.
    """

    dim: int
    domain_x: np.ndarray
    domain_xbar: np.ndarray
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    kind: str = "custom"
    h: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    tensors: Callable | None = None
    mode: str = "analytic"
    fd_base: float = 1e-3
    a2_tol: float = 1e-10

    def __post_init__(self):
        self.domain_x = as_box(self.domain_x, self.dim)
        self.domain_xbar = as_box(self.domain_xbar, self.dim)
        self.h = np.eye(self.dim) if self.h is None else np.asarray(self.h, dtype=float)
        if self.h.shape != (self.dim, self.dim) or not np.allclose(self.h, self.h.T):
            raise ConfigInvalid("reference metric h must be a symmetric n x n matrix")
        if np.linalg.eigvalsh(self.h)[0] <= 0:
            raise ConfigInvalid("reference metric h must be positive definite")
        if self.mode not in ("analytic", "fd"):
            raise ConfigInvalid(f"unknown derivative mode {self.mode!r}")
        if self.tensors is None:
            self.mode = "fd"

    # -- evaluation -----------------------------------------------------------
    def value(self, x, xbar):
        return self.func(np.asarray(x, dtype=float), np.asarray(xbar, dtype=float))

    def cost_matrix(self, xs, xbars) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        xbars = np.asarray(xbars, dtype=float)
        return self.func(xs[:, None, :], xbars[None, :, :])

    def check_point(self, x, xbar):
        if not in_box(self.domain_x, x):
            raise DomainError(f"x={np.asarray(x).tolist()} outside source box")
        if not in_box(self.domain_xbar, xbar):
            raise DomainError(f"xbar={np.asarray(xbar).tolist()} outside target box")

    def _scalar(self, p):
        n = self.dim
        return self.func(p[..., :n], p[..., n:])

    def fd_step(self, order: int) -> float:
        return self.fd_base * 10 ** (order / 4)

    def tensor(self, order: int, x, xbar) -> np.ndarray:
        """All ``order``-th partials with respect to ``p = (x, xbar)``."""
        p = np.concatenate([np.asarray(x, float), np.asarray(xbar, float)])
        if self.mode == "analytic":
            return self.tensors(p, order)[order - 1]
        return fd.derivative_tensor(self._scalar, p, order, self.fd_step(order))

    def deriv(self, index: tuple[int, ...], x, xbar) -> float:
        """Single partial along the coordinate multi-index ``index``."""
        index = tuple(index)
        if not index:
            return float(self.value(x, xbar))
        if len(index) > 4:
            raise ValueError("derivatives are provided up to total order 4")
        if self.mode == "analytic":
            return float(self.tensor(len(index), x, xbar)[index])
        p = np.concatenate([np.asarray(x, float), np.asarray(xbar, float)])
        return fd.mixed_partial(self._scalar, p, index, self.fd_step(len(index)))

    def grad_x(self, x, xbar) -> np.ndarray:
        return self.tensor(1, x, xbar)[: self.dim]

    def hess_xx(self, x, xbar) -> np.ndarray:
        n = self.dim
        return self.tensor(2, x, xbar)[:n, :n]

    def mixed(self, x, xbar) -> np.ndarray:
        """``M[i, k] = d2c / dx^i dxbar^k``."""
        n = self.dim
        if self.mode == "analytic":
            return self.tensor(2, x, xbar)[:n, n:]
        p = np.concatenate([np.asarray(x, float), np.asarray(xbar, float)])
        axes = (tuple(range(n)), tuple(range(n, 2 * n)))
        return fd.derivative_tensor(self._scalar, p, 2, self.fd_step(2), axes=axes)

    def mixed_jet(self, x, xbar):
        """``(M, dM, d2M)`` with ``dM[a] = dM/dp_a`` and ``d2M[a, b]`` likewise."""
        n = self.dim
        p = np.concatenate([np.asarray(x, float), np.asarray(xbar, float)])
        if self.mode == "analytic":
            t2, t3, t4 = self.tensors(p, 4)[1:4]
            return t2[:n, n:], t3[:, :n, n:], t4[:, :, :n, n:]
        full = tuple(range(2 * n))
        xs, xbs = tuple(range(n)), tuple(range(n, 2 * n))
        M = fd.derivative_tensor(self._scalar, p, 2, self.fd_step(2), axes=(xs, xbs))
        dM = fd.derivative_tensor(self._scalar, p, 3, self.fd_step(3), axes=(full, xs, xbs))
        d2M = fd.derivative_tensor(self._scalar, p, 4, self.fd_step(4), axes=(full, full, xs, xbs))
        return M, dM, d2M

    # -- variants ---------------------------------------------------------------
    def with_mode(self, mode: str) -> "CostModel":
        return CostModel(self.dim, self.domain_x, self.domain_xbar, self.func, self.kind,
                         self.h, dict(self.params), self.tensors, mode, self.fd_base, self.a2_tol)

    def swapped(self, h=None) -> "CostModel":
        """The same cost with the roles of source and target exchanged."""
        n = self.dim
        func = self.func

        def swapped_func(y, ybar):
            return func(ybar, y)

        tensors = None
        if self.tensors is not None:
            perm = np.r_[np.arange(n, 2 * n), np.arange(n)]
            inner = self.tensors

            def tensors(p, order):
                out = inner(p[perm], order)
                return [t[np.ix_(*([perm] * t.ndim))] for t in out]

        return CostModel(n, self.domain_xbar, self.domain_x, swapped_func, self.kind,
                         h, dict(self.params), tensors, self.mode, self.fd_base, self.a2_tol)


def _difference_tensors(profile: _Radial, n: int):
    J = np.hstack([np.eye(n), -np.eye(n)])

    def tensors(p, order):
        z = p[:n] - p[n:]
        out = []
        for k, t in enumerate(profile.tensors(z, order), start=1):
            for _ in range(k):
                t = np.tensordot(t, J, axes=([0], [0]))
            out.append(t)
        return out

    return tensors


def _bilinear_tensors(n: int):
    def tensors(p, order):
        d = 2 * n
        hess = np.zeros((d, d))
        hess[:n, n:] = -np.eye(n)
        hess[n:, :n] = -np.eye(n)
        out = [-np.concatenate([p[n:], p[:n]]), hess]
        out += [np.zeros((d,) * k) for k in range(3, order + 1)]
        return out[:order]

    return tensors


def _table_func(n: int, params: dict):
    try:
        axes = [np.asarray(a, dtype=float) for a in params["axes"]]
        values = np.asarray(params["values"], dtype=float)
    except KeyError as exc:
        raise ConfigInvalid(f"custom_table cost needs {exc.args[0]!r}") from exc
    if len(axes) != 2 * n or values.shape != tuple(a.size for a in axes):
        raise ConfigInvalid("custom_table cost: need 2n axes and a matching value grid")
    method = params.get("method", "quintic")
    interp = RegularGridInterpolator(axes, values, method=method, bounds_error=False,
                                     fill_value=None)

    def func(x, xbar):
        x, xbar = np.broadcast_arrays(x, xbar)
        pts = np.concatenate([x, xbar], axis=-1)
        return interp(pts.reshape(-1, 2 * n)).reshape(pts.shape[:-1])

    return func


def make_cost(kind: str, dim: int, domain_x, domain_xbar, *, h=None, params=None,
              mode: str = "analytic", fd_base: float = 1e-3) -> CostModel:
    """Build one of the registered cost kinds."""
    params = dict(params or {})
    if kind == "bilinear":
        def func(x, xbar):
            return -np.sum(x * xbar, axis=-1)
        tensors = _bilinear_tensors(dim)
    elif kind in _PROFILES:
        profile = _PROFILES[kind]

        def func(x, xbar):
            return profile.value(x - xbar)
        tensors = _difference_tensors(profile, dim)
    elif kind == "custom_table":
        func = _table_func(dim, params)
        tensors = None
        mode = "fd"
    else:
        raise ConfigInvalid(f"unknown cost kind {kind!r}; expected one of {COST_KINDS}")
    return CostModel(dim, domain_x, domain_xbar, func, kind, h, params, tensors, mode, fd_base)


def cost_from_callable(func, dim: int, domain_x, domain_xbar, *, h=None,
                       fd_base: float = 1e-3) -> CostModel:
    """Wrap a vectorized ``func(x, xbar)``; derivatives come from finite differences."""
    return CostModel(dim, domain_x, domain_xbar, func, "custom", h, {}, None, "fd", fd_base)

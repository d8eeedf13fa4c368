"""Centered finite-difference stencils.

All routines work on callables that accept a stack of points ``(..., d)`` and
return arrays with the stack shape leading.
"""

from __future__ import annotations

import itertools
from collections import Counter

import numpy as np

# second-order central stencils for the m-th derivative: (offsets, weights)
_CENTRAL2 = {
    1: (np.array([-1, 1]), np.array([-0.5, 0.5])),
    2: (np.array([-1, 0, 1]), np.array([1.0, -2.0, 1.0])),
    3: (np.array([-2, -1, 1, 2]), np.array([-0.5, 1.0, -1.0, 0.5])),
    4: (np.array([-2, -1, 0, 1, 2]), np.array([1.0, -4.0, 6.0, -4.0, 1.0])),
}

# fourth-order central stencils for first and second derivatives
_D1_4 = (np.array([-2, -1, 1, 2]), np.array([1 / 12, -2 / 3, 2 / 3, -1 / 12]))
_D2_4 = (np.array([-2, -1, 0, 1, 2]), np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]))


def _product_stencil(index: tuple[int, ...], dim: int, table):
    """Offsets (k, dim) and weights (k,) of a tensor-product stencil."""
    counts = Counter(index)
    axes = sorted(counts)
    per_axis = [table[counts[a]] for a in axes]
    offsets, weights = [], []
    for combo in itertools.product(*(range(len(o)) for o, _ in per_axis)):
        off = np.zeros(dim)
        w = 1.0
        for a, (o, wt), j in zip(axes, per_axis, combo):
            off[a] = o[j]
            w *= wt[j]
        offsets.append(off)
        weights.append(w)
    return np.array(offsets), np.array(weights)


def mixed_partial(f, p, index: tuple[int, ...], step: float, richardson: bool = True):
    """Mixed partial derivative of scalar ``f`` at ``p`` along ``index``.

    ``index`` lists coordinate indices with repetition, e.g. ``(0, 0, 3)``.
    Second-order product stencils, optionally Richardson-extrapolated to
    fourth order using steps ``step`` and ``step / 2``.
    """
    p = np.asarray(p, dtype=float)
    k = len(index)
    if k == 0:
        return float(f(p[None, :])[0])
    offsets, weights = _product_stencil(tuple(index), p.size, _CENTRAL2)

    def at(hh):
        vals = f(p[None, :] + hh * offsets)
        return float(weights @ vals) / hh**k

    coarse = at(step)
    if not richardson:
        return coarse
    fine = at(step / 2)
    return (4.0 * fine - coarse) / 3.0


def derivative_tensor(f, p, order: int, step: float, richardson: bool = True,
                      axes: tuple[tuple[int, ...], ...] | None = None) -> np.ndarray:
    """Full symmetric tensor of ``order``-th partials of scalar ``f`` at ``p``.

    ``axes`` optionally restricts each tensor slot to a subset of coordinates;
    the result then has shape ``tuple(len(a) for a in axes)``.
    """
    p = np.asarray(p, dtype=float)
    d = p.size
    if axes is None:
        axes = tuple(tuple(range(d)) for _ in range(order))
    shape = tuple(len(a) for a in axes)
    out = np.empty(shape)
    cache: dict[tuple[int, ...], float] = {}
    for slot in itertools.product(*(range(s) for s in shape)):
        index = tuple(sorted(axes[i][j] for i, j in enumerate(slot)))
        if index not in cache:
            cache[index] = mixed_partial(f, p, index, step, richardson)
        out[slot] = cache[index]
    return out


def field_jet(F, p, step: float):
    """Value, gradient and Hessian of an array-valued field by 4th-order FD.

    Returns ``(F0, dF, d2F)`` with ``dF[a] = dF/dp_a`` and
    ``d2F[a, b] = d2F/dp_a dp_b``.
    """
    p = np.asarray(p, dtype=float)
    d = p.size
    eye = np.eye(d)
    f0 = np.asarray(F(p), dtype=float)
    d1 = np.zeros((d,) + f0.shape)
    d2 = np.zeros((d, d) + f0.shape)
    o1, w1 = _D1_4
    o2, w2 = _D2_4
    cache = {}

    def ev(off):
        key = tuple(off)
        if key not in cache:
            cache[key] = np.asarray(F(p + step * np.asarray(off, dtype=float)), dtype=float)
        return cache[key]

    for a in range(d):
        d1[a] = sum(w * ev(o * eye[a]) for o, w in zip(o1, w1)) / step
        d2[a, a] = sum(w * (ev(o * eye[a]) if o else f0) for o, w in zip(o2, w2)) / step**2
    for a in range(d):
        for b in range(a + 1, d):
            acc = 0.0
            for oa, wa in zip(o1, w1):
                for ob, wb in zip(o1, w1):
                    acc = acc + wa * wb * ev(oa * eye[a] + ob * eye[b])
            d2[a, b] = d2[b, a] = acc / step**2
    return f0, d1, d2


def central_gradient(F, x, step: float) -> np.ndarray:
    """Second-order centered first derivatives, ``out[i] = dF/dx_i``."""
    x = np.asarray(x, dtype=float)
    eye = np.eye(x.size)
    return np.stack([(np.asarray(F(x + step * e)) - np.asarray(F(x - step * e))) / (2 * step)
                     for e in eye])


def central_hessian(F, x, step: float) -> np.ndarray:
    """Second-order centered second derivatives, ``out[i, j] = d2F/dx_i dx_j``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    eye = np.eye(n)
    f0 = np.asarray(F(x), dtype=float)
    out = np.zeros((n, n) + f0.shape)
    for i in range(n):
        fp = np.asarray(F(x + step * eye[i]))
        fm = np.asarray(F(x - step * eye[i]))
        out[i, i] = (fp - 2 * f0 + fm) / step**2
        for j in range(i + 1, n):
            pp = np.asarray(F(x + step * (eye[i] + eye[j])))
            pm = np.asarray(F(x + step * (eye[i] - eye[j])))
            mp = np.asarray(F(x - step * (eye[i] - eye[j])))
            mm = np.asarray(F(x - step * (eye[i] + eye[j])))
            out[i, j] = out[j, i] = (pp - pm - mp + mm) / (4 * step**2)
    return out

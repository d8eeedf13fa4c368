"""Dense-stencil oracle for the MTW curvature of the log cost, frozen into frozen/dense_stencil.json.

Only cost values are used: the mixed Hessian, the conformal factor, the
metric and its first two derivatives all come from order-6 central
differences at step 1e-2 with one Richardson step (h, h/2). Densities are
uniform with unit mass, so chi = |det c_{x xbar}|^(-1/2). Nothing here
imports otgeo.
"""

import itertools
import json
from pathlib import Path

import numpy as np
from scipy.stats import special_ortho_group

from _riemann import riemann_from_derivs

OUT = Path(__file__).with_name("frozen") / "dense_stencil.json"
STEP = 1e-2
N = 2
OFF = np.arange(-3, 4)
D1 = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])
D2 = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])


def cost(P):
    z = P[..., :N] - P[..., N:]
    return -0.5 * np.log(np.sum(z * z, axis=-1))


def richardson(f):
    return (64.0 * f(STEP / 2) - f(STEP)) / 63.0


def mixed_hessian(P):
    """M[m, i, k] = d2c/dx_i dxbar_k at the rows of P."""
    P = np.atleast_2d(P)
    out = np.zeros((len(P), N, N))
    E = np.eye(2 * N)
    for i, k in itertools.product(range(N), repeat=2):
        def at(h):
            shift = h * (OFF[:, None, None] * E[i] + OFF[None, :, None] * E[N + k])
            vals = cost(P[:, None, None, :] + shift[None])
            return np.einsum("mab,a,b->m", vals, D1, D1) / h**2
        out[:, i, k] = richardson(at)
    return out


def metric(P):
    M = mixed_hessian(P)
    chi = np.abs(np.linalg.det(M)) ** (-1.0 / N)
    G = np.zeros((len(M), 2 * N, 2 * N))
    G[:, :N, N:] = -chi[:, None, None] * M
    G[:, N:, :N] = -chi[:, None, None] * np.swapaxes(M, 1, 2)
    return G, M, chi


def metric_jet(p):
    d = 2 * N
    E = np.eye(d)
    G0 = metric(p)[0][0]
    dG = np.zeros((d, d, d))
    d2G = np.zeros((d, d, d, d))
    for a in range(d):
        def first(h):
            vals = metric(p + h * OFF[:, None] * E[a])[0]
            return np.einsum("mij,m->ij", vals, D1) / h
        dG[a] = richardson(first)

        def second(h):
            vals = metric(p + h * OFF[:, None] * E[a])[0]
            return np.einsum("mij,m->ij", vals, D2) / h**2
        d2G[a, a] = richardson(second)
    for a, b in itertools.combinations(range(d), 2):
        def mixed(h):
            shift = h * (OFF[:, None, None] * E[a] + OFF[None, :, None] * E[b])
            vals = metric((p + shift).reshape(-1, d))[0].reshape(7, 7, d, d)
            return np.einsum("abij,a,b->ij", vals, D1, D1) / h**2
        d2G[a, b] = d2G[b, a] = richardson(mixed)
    return G0, dG, d2G


def sectional(R, V, W):
    return float(np.einsum("abcd,a,b,c,d->", R, V, W, V, W))


def probe_value():
    p = np.array([0.5, 0.5, 2.5, 0.5])
    R = riemann_from_derivs(*metric_jet(p))
    return {"point": p.tolist(), "xi": [1, 0], "xibar": [0, 1],
            "value": sectional(R, np.r_[1.0, 0, 0, 0], np.r_[0, 0, 0, 1.0])}


def kappa_grid(region_x, region_xbar, grid, n_rotations=8, seed=0):
    """Grid minimum of the normalized MTW ratio over the dual-frame pairs."""
    rng = np.random.default_rng(seed)
    rotations = [np.eye(N)] + [special_ortho_group.rvs(N, random_state=rng) for _ in range(n_rotations)]
    axes = [np.linspace(lo, hi, grid) for lo, hi in np.vstack([region_x, region_xbar])]
    lowest = np.inf
    for p in itertools.product(*axes):
        p = np.array(p)
        R = riemann_from_derivs(*metric_jet(p))
        _, M, chi = metric(p)
        M, chi = M[0], float(chi[0])
        hbar = chi**2 * M.T @ M
        for Q in rotations:
            Xibar = np.linalg.solve(-chi * M, np.linalg.inv(Q).T)
            for i, j in itertools.permutations(range(N), 2):
                xi, xibar = Q[:, i], Xibar[:, j]
                V, W = np.r_[xi, 0, 0], np.r_[0, 0, xibar]
                ratio = sectional(R, V, W) / ((xi @ xi) * (xibar @ hbar @ xibar))
                lowest = min(lowest, ratio)
    return float(lowest)


def main():
    region = ([[0.15, 0.85], [0.15, 0.85]], [[2.0, 3.0], [0.0, 1.0]])
    data = {
        "probe": probe_value(),
        "kappa": {"region": region, "n_rotations": 8, "seed": 0,
                  "by_grid": {str(k): kappa_grid(*region, grid=k) for k in (3, 4)}},
    }
    OUT.parent.mkdir(exist_ok=True)
    OUT.write_text(json.dumps(data, indent=1))
    print(json.dumps(data, indent=1))


if __name__ == "__main__":
    main()

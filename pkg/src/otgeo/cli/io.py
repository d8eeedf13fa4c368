"""Solution files, probe lists and CSV field dumps."""

from __future__ import annotations

import csv
import itertools
import json

import numpy as np
from scipy import sparse

from ..errors import ConfigInvalid, IoError
from ..geometry.curvature import riemann_curvature
from ..geometry.metrics import Geometry
from ..geometry.mtw import mtw_sectional, orthogonal_pairs
from ..transport.measures import DiscreteMeasure
from ..transport.solution import TransportSolution
from .report import write_json

SINKHORN_PLAN_FLOOR = 1e-15


def _measure_dict(m: DiscreteMeasure) -> dict:
    return {
        "points": m.points,
        "weights": m.weights,
        "box": None if m.box is None else m.box,
        "shape": None if m.shape is None else list(m.shape),
    }


def _measure(d: dict) -> DiscreteMeasure:
    return DiscreteMeasure(np.asarray(d["points"], float), np.asarray(d["weights"], float),
                           None if d.get("box") is None else np.asarray(d["box"], float),
                           None if d.get("shape") is None else tuple(d["shape"]))


def solution_dict(sol: TransportSolution) -> dict:
    """Atoms, plan triplets ``(i, j, mass)``, duals and map samples.

    Entropic plans are dense; only entries above ``1e-15`` are listed and the
    full plan is rebuilt from the duals on reading.
    """
    P = sol.plan.tocoo()
    keep = P.data > (SINKHORN_PLAN_FLOOR if sol.method == "sinkhorn" else 0.0)
    trip = [[int(i), int(j), float(v)] for i, j, v in zip(P.row[keep], P.col[keep], P.data[keep])]
    return {
        "method": sol.method,
        "source": _measure_dict(sol.source),
        "target": _measure_dict(sol.target),
        "plan": trip,
        "u": sol.u,
        "u_bar": sol.u_bar,
        "F": sol.F,
        "objective": sol.objective,
        "dual_objective": sol.dual_objective,
        "eps_schedule": list(sol.eps_schedule),
    }


def write_solution(sol: TransportSolution, path) -> None:
    write_json(solution_dict(sol), path)


def read_solution(path, cost=None) -> TransportSolution:
    """Load a solution file; ``cost`` (a CostModel) is needed for entropic map evaluation."""
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path} is not valid JSON: {exc}") from exc
    try:
        src, tgt = _measure(d["source"]), _measure(d["target"])
        u, u_bar = np.asarray(d["u"], float), np.asarray(d["u_bar"], float)
        schedule = tuple(d.get("eps_schedule", ()))
        if d["method"] == "sinkhorn" and cost is not None:
            eps = schedule[-1]
            C = cost.cost_matrix(src.points, tgt.points)
            P = sparse.csr_array(np.outer(src.weights, tgt.weights)
                                 * np.exp(-(u[:, None] + u_bar[None, :] + C) / eps))
        else:
            trip = np.asarray(d["plan"], float).reshape(-1, 3)
            P = sparse.csr_array((trip[:, 2], (trip[:, 0].astype(int), trip[:, 1].astype(int))),
                                 shape=(len(src), len(tgt)))
        return TransportSolution(src, tgt, P, u, u_bar, np.asarray(d["F"], float), d["method"],
                                 d["objective"], d["dual_objective"], schedule, cost=cost)
    except (KeyError, IndexError, ValueError, TypeError) as exc:
        raise ConfigInvalid(f"{path} is not a solution file: {exc}") from exc


def read_probes(path, dim: int) -> list[list[int]]:
    """Source-grid indices, one probe per row (a header row is skipped)."""
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for rec in csv.reader(fh):
                if not rec or not rec[0].strip():
                    continue
                try:
                    idx = [int(v) for v in rec]
                except ValueError:
                    if not rows:
                        continue
                    raise ConfigInvalid(f"bad probe row {rec!r} in {path}")
                if len(idx) != dim:
                    raise ConfigInvalid(f"probe row {rec!r} needs {dim} indices")
                rows.append(idx)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return rows


def product_grid(geometry: Geometry, resolution: int) -> np.ndarray:
    """Points of the ``resolution^(2n)`` lattice spanning both domain boxes."""
    model = geometry.model
    axes = [np.linspace(lo, hi, resolution) for lo, hi in np.vstack([model.domain_x, model.domain_xbar])]
    return np.array(list(itertools.product(*axes)), dtype=float)


def field_rows(geometry: Geometry, points):
    """Rows ``(p, label, i, j, value)``: g_hat and S_hat components, then MTW samples.

    MTW samples use the coordinate dual frame; ``(i, j)`` names the pair
    ``(xi_i, xibar_j)``, ``i != j``. Indices are 1-based.
    """
    model, dens = geometry.model, geometry.dens
    n = geometry.dim
    for p in np.atleast_2d(np.asarray(points, dtype=float)):
        G = geometry.g_hat.eval(p)
        S = geometry.S_hat.eval(p)
        for label, T in (("g_hat", G), ("S_hat", S)):
            for i in range(2 * n):
                for j in range(2 * n):
                    yield p, label, i + 1, j + 1, float(T[i, j])
        if n >= 2:
            x, xbar = p[:n], p[n:]
            pairs = orthogonal_pairs(model, dens, x, xbar, [np.eye(n)])
            for (i, j), (xi, xibar) in zip(itertools.permutations(range(n), 2), pairs):
                val = mtw_sectional(model, dens, x, xbar, xi, xibar, g_hat=geometry.g_hat)
                yield p, "mtw", i + 1, j + 1, float(val)


def dump_fields(geometry: Geometry, grid, path) -> int:
    """CSV dump of g_hat, S_hat and MTW samples; ``grid`` is a point array or a lattice resolution.

    Returns the number of data rows written.
    """
    n = geometry.dim
    points = product_grid(geometry, int(grid)) if np.ndim(grid) == 0 else np.asarray(grid, float)
    header = [f"x{k + 1}" for k in range(n)] + [f"xbar{k + 1}" for k in range(n)] + ["label", "i", "j", "value"]
    count = 0
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for p, label, i, j, val in field_rows(geometry, points):
                w.writerow(["%.17g" % v for v in p] + [label, i, j, "%.17g" % val])
                count += 1
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return count


def dump_riemann(geometry: Geometry, p, path, stencil_h: float | None = None) -> int:
    """All ``Rhat[alpha, beta, gamma, delta]`` components at ``p`` (0-based indices)."""
    R = riemann_curvature(geometry.g_hat, np.asarray(p, float), stencil_h).riemann
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "beta", "gamma", "delta", "value"])
            for idx in itertools.product(range(R.shape[0]), repeat=4):
                w.writerow(list(idx) + ["%.17g" % R[idx]])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return R.size

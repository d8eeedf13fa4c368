"""Stage functions and the full geometry -> solve -> graph -> verify pipeline."""

from __future__ import annotations

import time

import numpy as np

from .. import __version__
from ..errors import ConfigInvalid, OtgeoError, StageFailure
from ..estimates.cutoff import make_cutoff
from ..estimates.pogorelov import check_pogorelov_bound
from ..geometry.metrics import chi
from ..geometry.mtw import estimate_kappa
from ..graph.chart import GraphChart
from ..graph.hessian import HESSIAN_KINDS, hessian_metric_check
from ..graph.identity import elliptic_identity_residual
from ..transport.exact import solve_exact
from ..transport.sinkhorn import solve_sinkhorn
from ..transport.second_order import check_det_identity, second_order_data
from ..transport.solution import TransportSolution
from .report import RunReport
from .scenario import Scenario, build_scenario, load_scenario

VOLUME_SAMPLES = 16


def _kappa_region(sc: Scenario):
    cut = sc.config.get("cutoff")
    if cut is None:
        return None
    c, r = np.asarray(cut["center"], float), float(cut["radius"])
    return np.column_stack([c - r, c + r]), sc.model.domain_xbar


def stage_geometry(sc: Scenario):
    """Volume-form spot checks and the MTW constant."""
    model, dens, geo = sc.model, sc.dens, sc.geometry
    rng = np.random.default_rng(sc.seed)
    worst_g = worst_s = 0.0
    for _ in range(VOLUME_SAMPLES):
        x = rng.uniform(model.domain_x[:, 0], model.domain_x[:, 1])
        xb = rng.uniform(model.domain_xbar[:, 0], model.domain_xbar[:, 1])
        p = np.r_[x, xb]
        target = float(dens.rho.value(x) * dens.rho_bar.value(xb))
        worst_g = max(worst_g, abs(np.sqrt(abs(np.linalg.det(geo.g_hat.eval(p)))) - target) / target)
        worst_s = max(worst_s, abs(np.sqrt(np.linalg.det(geo.S_hat.eval(p))) - target) / target)
    cfg = sc.config.get("kappa", {})
    kap = estimate_kappa(model, dens, _kappa_region(sc), grid=cfg.get("grid", 4),
                         n_rotations=cfg.get("n_rotations", 8), seed=sc.seed)
    centre = (np.mean(model.domain_x, axis=1), np.mean(model.domain_xbar, axis=1))
    out = {
        "status": "ok",
        "cost": model.kind,
        "mode": model.mode,
        "chi_at_center": chi(model, dens, *centre),
        "volume_form_rel_residual_g_hat": worst_g,
        "volume_form_rel_residual_S_hat": worst_s,
        "kappa": kap.kappa,
        "kappa_min_ratio": kap.min_ratio,
        "kappa_points": kap.n_points,
        "kappa_pairs": kap.n_pairs,
        "mtw_violated": kap.mtw_violated,
        "flags": list(kap.flags),
    }
    return out, kap


def solve(sc: Scenario, method: str | None = None) -> TransportSolution:
    solver = sc.config.get("solver", {})
    method = method or solver.get("method", "exact")
    mu, nu = sc.measures()
    C = sc.model.cost_matrix(mu.points, nu.points)
    if method == "exact":
        return solve_exact(C, mu, nu, cost=sc.model)
    if method == "sinkhorn":
        return solve_sinkhorn(C, mu, nu, sc.eps_schedule(mu), max_iters=solver.get("max_iters", 20000),
                              tol=solver.get("tol", 1e-10), cost=sc.model)
    raise ConfigInvalid(f"unknown solver method {method!r}")


def solution_summary(sol: TransportSolution) -> dict:
    return {
        "status": "ok",
        "method": sol.method,
        "atoms": [len(sol.source), len(sol.target)],
        "objective": sol.objective,
        "dual_objective": sol.dual_objective,
        "duality_gap": sol.duality_gap,
        "marginal_residual": sol.marginal_residual(),
        "eps": sol.eps,
        "iterations": sol.info.get("iterations"),
        "regime": sol.info.get("regime"),
    }


def make_chart(sc: Scenario, sol: TransportSolution) -> GraphChart:
    step = sc.config.get("stencil", {}).get("step")
    return GraphChart.from_solution(sol, step)


def default_probes(sol: TransportSolution) -> list[list[int]]:
    return [[k // 2 for k in sol.source.shape]]


def probe_row(sc: Scenario, sol: TransportSolution, chart: GraphChart, idx) -> dict:
    model, dens, geo = sc.model, sc.dens, sc.geometry
    idx = [int(i) for i in idx]
    if len(idx) != sc.dim or any(not 0 <= i < k for i, k in zip(idx, sol.source.shape)):
        raise ConfigInvalid(f"probe {idx} is not a source grid index")
    x = sol.source.points[sol.source.flat_index(idx)]
    data = second_order_data(model, dens, sol, x, chart.step)
    ident = elliptic_identity_residual(chart, geo, None, x, strict=False)
    row = {
        "index": idx,
        "x": x,
        "F": data.Fx,
        "lambdas": data.lambdas,
        "lambda_sums": data.lambdas + 1 / data.lambdas,
        "det_identity_residual": check_det_identity(data, dens, model.h),
        "B_asymmetry": data.asymmetry,
        "H_norm": ident.H_norm,
        "H_ok": ident.H_ok,
        "identity_lhs": ident.lhs,
        "identity_terms": ident.rhs_terms,
        "identity_residual": ident.residual,
    }
    if model.kind in HESSIAN_KINDS:
        row["hessian_metric_residual"] = hessian_metric_check(chart, geo, sol, x)
    return row


def stage_graph(sc: Scenario, sol: TransportSolution, probes=None) -> dict:
    chart = make_chart(sc, sol)
    if probes is None:
        probes = sc.config["probes"] if "probes" in sc.config else default_probes(sol)
    rows = [probe_row(sc, sol, chart, idx) for idx in probes]
    out = {"status": "ok", "grid_step": chart.step, "points": rows, "flags": []}
    if rows:
        out["max_det_identity_residual"] = max(r["det_identity_residual"] for r in rows)
        out["max_H_norm"] = max(r["H_norm"] for r in rows)
        out["max_identity_residual"] = max(r["identity_residual"] for r in rows)
    if any(not r["H_ok"] for r in rows):
        out["flags"].append("MeanCurvatureTooLarge")
    return out


def stage_verify(sc: Scenario, sol: TransportSolution, kappa, cutoff_cfg=None) -> dict:
    """Pogorelov report; without a usable kappa it reduces to the eigenvalue table."""
    cutoff_cfg = cutoff_cfg or sc.config.get("cutoff")
    if cutoff_cfg is None:
        raise ConfigInvalid("the verify stage needs a cutoff {center, radius}")
    cutoff = make_cutoff(cutoff_cfg["center"], cutoff_cfg["radius"], sc.model.domain_x)
    rep = check_pogorelov_bound(make_chart(sc, sol), sc.geometry, cutoff, kappa)
    return {
        "status": "ok",
        "cutoff": {"center": cutoff.center, "radius": cutoff.radius},
        "x0": rep.x0,
        "mu_n": rep.mu_n,
        "phi0": rep.phi0,
        "kappa_raw": rep.kappa_raw,
        "kappa": rep.kappa,
        "C_bound": rep.C_bound,
        "C_maxpoint": rep.C_maxpoint,
        "C_key": rep.C_key,
        "curvature_sum": rep.curvature_sum,
        "eigen_bound_ok": rep.eigen_bound_ok,
        "eigen_bound_max_ratio": rep.eigen_bound_max_ratio,
        "norms": rep.norms,
        "table": rep.table,
        "flags": rep.flags,
    }


def _timed(report: RunReport, name: str, fn, *args):
    t0 = time.perf_counter()
    try:
        result = fn(*args)
    except OtgeoError as exc:
        report.timings[name] = time.perf_counter() - t0
        report.stages[name] = {"status": "failed", "error": type(exc).__name__, "message": str(exc)}
        report.exit_code = exc.exit_code
        raise StageFailure(name, exc) from exc
    report.timings[name] = time.perf_counter() - t0
    return result


def run_scenario(scenario) -> RunReport:
    """Run every stage in order and collect the results.

    ``scenario`` may be a :class:`Scenario`, a config dict or a path. A fatal
    error raises :class:`StageFailure` carrying the partial report as
    ``.report``. Nonfatal conditions become flags: ``mtw_violated`` and
    ``KappaNonpositive`` replace the Pogorelov stage by the eigenvalue table
    (``quant``); ``MeanCurvatureTooLarge`` marks probes where the identity
    check is outside its hypotheses.
    """
    if isinstance(scenario, dict):
        scenario = build_scenario(scenario)
    elif not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    sc = scenario
    report = RunReport(sc.name, sc.config_hash(), __version__)
    try:
        geo_out, kap = _timed(report, "geometry", stage_geometry, sc)
        report.stages["geometry"] = geo_out
        for f in geo_out["flags"]:
            report.add_flag(f)
        sol = _timed(report, "solve", solve, sc)
        report.stages["solve"] = solution_summary(sol)
        graph_out = _timed(report, "graph", stage_graph, sc, sol)
        report.stages["graph"] = graph_out
        for f in graph_out["flags"]:
            report.add_flag(f)
        usable = sc.dim >= 2 and kap.kappa is not None and kap.kappa > 0
        if sc.dim >= 2 and not usable:
            report.add_flag("KappaNonpositive")
        if "cutoff" in sc.config:
            name = "verify" if usable else "quant"
            out = _timed(report, name, stage_verify, sc, sol, kap if usable else None)
            report.stages[name] = out
            for f in out["flags"]:
                report.add_flag(f)
        elif not usable:
            report.stages["quant"] = {
                "status": "ok",
                "table": [{"index": r["index"], "lambdas": r["lambdas"],
                           "lambda_sums": r["lambda_sums"]} for r in graph_out["points"]],
            }
    except StageFailure as exc:
        exc.report = report
        raise
    return report

"""``otgeo`` command line: mtw-scan, solve, graph, verify, run, dump."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .. import __version__
from ..errors import ConfigInvalid, IoError, OtgeoError, StageFailure
from . import pipeline
from .io import dump_fields, dump_riemann, read_probes, read_solution, write_solution
from .report import emit_report, write_json
from .scenario import load_config, load_scenario

logger = logging.getLogger("otgeo")


def _scenario(args):
    return load_scenario(args.config)


def _solution(args, sc):
    return read_solution(args.solution, cost=sc.model)


def _stamp(sc, payload: dict) -> dict:
    return {"scenario": sc.name, "config_hash": sc.config_hash(),
            "software": {"name": "otgeo", "version": __version__}, **payload}


def cmd_mtw_scan(args) -> int:
    sc = _scenario(args)
    out, _ = pipeline.stage_geometry(sc)
    write_json(_stamp(sc, out), args.out)
    return 0


def cmd_solve(args) -> int:
    sc = _scenario(args)
    sol = pipeline.solve(sc, args.method)
    write_solution(sol, args.out)
    logger.info("objective %.6g, duality gap %.3g", sol.objective, sol.duality_gap)
    return 0


def cmd_graph(args) -> int:
    sc = _scenario(args)
    sol = _solution(args, sc)
    probes = read_probes(args.points, sc.dim) if args.points else None
    out = pipeline.stage_graph(sc, sol, probes)
    write_json(_stamp(sc, out), args.out)
    return 0


def cmd_verify(args) -> int:
    sc = _scenario(args)
    sol = _solution(args, sc)
    cutoff = None
    if args.cutoff:
        try:
            cutoff = json.loads(args.cutoff)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"--cutoff is not valid JSON: {exc}") from exc
        if not isinstance(cutoff, dict) or not {"center", "radius"} <= set(cutoff):
            raise ConfigInvalid('--cutoff must look like {"center": [...], "radius": r}')
    geo_out, kap = pipeline.stage_geometry(sc)
    usable = sc.dim >= 2 and kap.kappa is not None and kap.kappa > 0
    out = pipeline.stage_verify(sc, sol, kap if usable else None, cutoff)
    out["geometry"] = geo_out
    write_json(_stamp(sc, out), args.out)
    return 0


def _run_one(config_path: str, out: str | None) -> tuple[str, int]:
    sc = load_scenario(config_path)
    target = out or sc.config.get("outputs", {}).get("report") or f"{sc.name}_report.json"
    try:
        report = pipeline.run_scenario(sc)
    except StageFailure as exc:
        emit_report(exc.report, target)
        logger.error("%s: %s", config_path, exc)
        return target, exc.exit_code
    emit_report(report, target)
    return target, 0


def _batch_entries(path) -> list[str]:
    data = load_config(path)
    entries = data.get("scenarios") if isinstance(data, dict) else data
    if not isinstance(entries, list) or not all(isinstance(e, str) for e in entries):
        raise ConfigInvalid('batch file must be a list of scenario paths or {"scenarios": [...]}')
    base = Path(path).parent
    return [str(base / e) if not Path(e).is_absolute() else e for e in entries]


def cmd_run(args) -> int:
    if args.batch:
        entries = _batch_entries(args.batch)
        outdir = Path(args.out) if args.out else None
        if outdir is not None:
            outdir.mkdir(parents=True, exist_ok=True)
        outs = [str(outdir / (Path(e).stem + "_report.json")) if outdir else None for e in entries]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_run_one, entries, outs))
        else:
            results = [_run_one(e, o) for e, o in zip(entries, outs)]
        for (target, code), entry in zip(results, entries):
            print(f"{entry}: exit {code} -> {target}")
        return max((code for _, code in results), default=0)
    if not args.config:
        raise ConfigInvalid("run needs --config or --batch")
    target, code = _run_one(args.config, args.out)
    print(target)
    return code


def cmd_dump(args) -> int:
    sc = _scenario(args)
    if args.riemann_at:
        try:
            p = [float(v) for v in args.riemann_at.split(",")]
        except ValueError as exc:
            raise ConfigInvalid("--riemann-at takes comma separated coordinates") from exc
        if len(p) != 2 * sc.dim:
            raise ConfigInvalid(f"--riemann-at needs {2 * sc.dim} coordinates")
        rows = dump_riemann(sc.geometry, p, args.out)
    else:
        rows = dump_fields(sc.geometry, args.grid, args.out)
    logger.info("wrote %d rows to %s", rows, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otgeo", description=__doc__)
    parser.add_argument("--version", action="version", version=f"otgeo {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mtw-scan", help="volume-form checks and the MTW constant kappa")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mtw_scan)

    p = sub.add_parser("solve", help="solve the discrete transport problem")
    p.add_argument("--config", required=True)
    p.add_argument("--method", choices=["exact", "sinkhorn"], default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("graph", help="frames, mean curvature and identity residuals at probes")
    p.add_argument("--config", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--points", help="CSV of source-grid indices")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("verify", help="maximum point and Pogorelov constants")
    p.add_argument("--config", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--cutoff", help='JSON {"center": [...], "radius": r}')
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("run", help="full pipeline for one scenario or a batch")
    p.add_argument("--config")
    p.add_argument("--batch", help="JSON list of scenario paths")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="report path (directory with --batch)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("dump", help="CSV dumps of metric components and curvature")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", type=int, default=3, help="lattice points per axis")
    p.add_argument("--riemann-at", help="comma separated product-chart point")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageFailure as exc:
        print(f"otgeo: {exc}", file=sys.stderr)
        return exc.exit_code
    except OtgeoError as exc:
        print(f"otgeo: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"otgeo: {exc}", file=sys.stderr)
        return IoError.exit_code


if __name__ == "__main__":
    sys.exit(main())

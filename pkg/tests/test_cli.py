import csv
import json
from pathlib import Path

import numpy as np
import pytest

from otgeo.cli.io import dump_fields, field_rows, read_probes, read_solution, write_solution
from otgeo.cli.main import main
from otgeo.cli.pipeline import run_scenario, solve, stage_graph
from otgeo.cli.report import content_hash, dumps
from otgeo.cli.scenario import build_scenario, config_hash, load_config, load_scenario
from otgeo.errors import ConfigInvalid, StageFailure
from otgeo.geometry.mtw import mtw_sectional

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def small(name, **changes):
    cfg = load_config(SCENARIOS / f"{name}.json")
    cfg.update(changes)
    return cfg


@pytest.fixture(scope="module")
def rescale_report():
    return run_scenario(small("rescale_1d", grid=64, probes=[[16], [32], [48]]))


def test_rescale_pipeline(rescale_report):
    rep = rescale_report.to_dict()
    assert rep["exit_code"] == 0
    assert set(rep["stages"]) == {"geometry", "solve", "graph", "quant"}
    assert "kappa_undefined_n1" in rep["flags"]
    graph = rep["stages"]["graph"]
    assert len(graph["points"]) == 3
    assert graph["max_det_identity_residual"] < 1 / 64
    assert all(abs(p["lambdas"][0] - 1) < 1e-8 for p in graph["points"])
    assert rep["stages"]["solve"]["duality_gap"] < 1e-9


def test_bilinear_pipeline_falls_back_to_eigenvalue_table():
    rep = run_scenario(small("bilinear_2d", grid=8, probes=[[4, 4]])).to_dict()
    assert {"KappaNonpositive", "mtw_violated"} <= set(rep["flags"])
    assert "quant" in rep["stages"] and "verify" not in rep["stages"]
    assert rep["stages"]["quant"]["table"]


def test_logcost_pipeline_runs_verifier():
    rep = run_scenario(small("logcost_2d", grid=12, probes=[[6, 6]],
                             kappa={"grid": 2, "n_rotations": 1})).to_dict()
    assert "verify" in rep["stages"]
    v = rep["stages"]["verify"]
    assert v["kappa"] > 0 and v["C_bound"] > 0 and v["eigen_bound_ok"]


def test_report_hash_is_deterministic():
    cfg = small("rescale_1d", grid=32, probes=[[8], [16]])
    a, b = run_scenario(cfg).to_dict(), run_scenario(cfg).to_dict()
    assert a["report_hash"] == b["report_hash"]
    assert a["timings"].keys() == b["timings"].keys()
    c = run_scenario(small("rescale_1d", grid=32, probes=[[8], [17]])).to_dict()
    assert c["report_hash"] != a["report_hash"]
    assert content_hash(a) == a["report_hash"]


def test_seed_override(monkeypatch):
    cfg = small("logcost_2d", grid=8, probes=[], kappa={"grid": 2, "n_rotations": 2})
    monkeypatch.delenv("OTGEO_SEED", raising=False)
    base = run_scenario(cfg).to_dict()
    monkeypatch.setenv("OTGEO_SEED", "3")
    other = run_scenario(cfg).to_dict()
    assert other["report_hash"] != base["report_hash"]
    monkeypatch.setenv("OTGEO_SEED", "x")
    with pytest.raises(ConfigInvalid):
        build_scenario(cfg)


def test_empty_probe_list_gives_empty_table():
    sc = build_scenario(small("rescale_1d", grid=16, probes=[]))
    out = stage_graph(sc, solve(sc), [])
    assert out["points"] == [] and "max_H_norm" not in out


def test_dumps_is_canonical():
    text = dumps({"b": [1.0, np.float64(0.1)], "a": np.array([[1, 2]]), "c": float("nan")})
    assert text.index('"a"') < text.index('"b"')
    assert "0.10000000000000001" in text and "null" in text
    assert json.loads(text)["a"] == [[1, 2]]


def test_solution_round_trip(tmp_path):
    for name in ("rescale_1d", "bilinear_2d"):
        sc = build_scenario(small(name, grid=8))
        sol = solve(sc)
        path = tmp_path / f"{name}.json"
        write_solution(sol, path)
        back = read_solution(path, cost=sc.model)
        assert np.array_equal(back.F, sol.F) and np.array_equal(back.u, sol.u)
        assert np.allclose(back.plan.toarray(), sol.plan.toarray(), atol=1e-15)
        assert back.objective == sol.objective


def test_field_dump(tmp_path):
    sc = load_scenario(SCENARIOS / "bilinear_2d.json")
    path = tmp_path / "fields.csv"
    rows = dump_fields(sc.geometry, 2, path)
    assert rows == 2**4 * (16 + 16 + 2)
    with open(path) as fh:
        data = list(csv.DictReader(fh))
    assert len(data) == rows
    # the flat metric is the same at every lattice point
    g = {}
    for r in data:
        if r["label"] == "g_hat":
            g.setdefault((r["i"], r["j"]), set()).add(r["value"])
    assert all(len(v) == 1 for v in g.values())


def test_mtw_rows_are_bit_exact():
    sc = build_scenario(small("logcost_2d"))
    p = np.array([0.3, 0.6, 2.4, 0.2])
    rows = [r for r in field_rows(sc.geometry, [p]) if r[1] == "mtw"]
    assert len(rows) == 2
    from otgeo.geometry.mtw import orthogonal_pairs
    pairs = orthogonal_pairs(sc.model, sc.dens, p[:2], p[2:], [np.eye(2)])
    for (_, _, i, j, val), (xi, xib) in zip(rows, pairs):
        assert val == mtw_sectional(sc.model, sc.dens, p[:2], p[2:], xi, xib, g_hat=sc.geometry.g_hat)


def test_probe_csv(tmp_path):
    path = tmp_path / "probes.csv"
    path.write_text("i,j\n3,4\n\n5,6\n")
    assert read_probes(path, 2) == [[3, 4], [5, 6]]
    path.write_text("3,4,5\n")
    with pytest.raises(ConfigInvalid):
        read_probes(path, 2)


def test_config_validation():
    with pytest.raises(ConfigInvalid):
        build_scenario({"dim": 2})
    with pytest.raises(ConfigInvalid):
        build_scenario(small("rescale_1d", cost={"kind": "nope"}))
    with pytest.raises(ConfigInvalid):
        build_scenario(small("bilinear_2d", probes=[[1]]))
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})


def test_stage_failure_carries_partial_report():
    cfg = small("logcost_2d", grid=8, probes=[], cutoff={"center": [0.1, 0.5], "radius": 0.3},
                kappa={"grid": 2, "n_rotations": 1})
    with pytest.raises(StageFailure) as info:
        run_scenario(cfg)
    rep = info.value.report.to_dict()
    assert rep["exit_code"] == 4
    assert rep["stages"]["verify"]["error"] == "SupportEscapesRegion"
    assert "solve" in rep["stages"]


def write_cfg(tmp_path, name, **changes):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(small(name, **changes)))
    return path


def test_cli_subcommands(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = write_cfg(tmp_path, "logcost_2d", grid=10, probes=[[5, 5]], kappa={"grid": 2, "n_rotations": 1})
    assert main(["mtw-scan", "--config", str(cfg), "--out", "scan.json"]) == 0
    assert json.loads(Path("scan.json").read_text())["kappa"] > 0
    assert main(["solve", "--config", str(cfg), "--out", "sol.json"]) == 0
    Path("probes.csv").write_text("4,4\n5,6\n")
    assert main(["graph", "--config", str(cfg), "--solution", "sol.json", "--points", "probes.csv",
                 "--out", "graph.json"]) == 0
    assert len(json.loads(Path("graph.json").read_text())["points"]) == 2
    assert main(["verify", "--config", str(cfg), "--solution", "sol.json",
                 "--cutoff", '{"center": [0.5, 0.5], "radius": 0.3}', "--out", "verify.json"]) == 0
    assert json.loads(Path("verify.json").read_text())["C_bound"] > 0
    assert main(["run", "--config", str(cfg), "--out", "report.json"]) == 0
    assert main(["dump", "--config", str(cfg), "--riemann-at", "0.5,0.5,2.5,0.5", "--out", "r.csv"]) == 0
    assert len(Path("r.csv").read_text().splitlines()) == 1 + 256
    assert Path("r.csv").read_text().splitlines()[0] == "alpha,beta,gamma,delta,value"


def test_cli_batch(tmp_path):
    a = write_cfg(tmp_path, "rescale_1d", grid=16, probes=[[8]])
    b = write_cfg(tmp_path, "bilinear_2d", grid=8, probes=[[4, 4]])
    batch = tmp_path / "batch.json"
    batch.write_text(json.dumps([a.name, b.name]))
    assert main(["run", "--batch", str(batch), "--out", str(tmp_path / "out")]) == 0
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["bilinear_2d_report.json",
                                                                   "rescale_1d_report.json"]


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 5
    bad = tmp_path / "bad.json"
    bad.write_text('{"dim": 2}')
    assert main(["run", "--config", str(bad)]) == 2
    bad.write_text("{not json")
    assert main(["mtw-scan", "--config", str(bad), "--out", "x"]) == 2
    escape = write_cfg(tmp_path, "logcost_2d", grid=8, probes=[], cutoff={"center": [0.1, 0.5], "radius": 0.3},
                       kappa={"grid": 2, "n_rotations": 1})
    assert main(["run", "--config", str(escape), "--out", str(tmp_path / "r.json")]) == 4
    assert json.loads((tmp_path / "r.json").read_text())["exit_code"] == 4
    unsolvable = write_cfg(tmp_path, "rescale_1d", grid=16, solver={"method": "sinkhorn", "eps_schedule": [1e-4],
                                                                    "max_iters": 2})
    assert main(["run", "--config", str(unsolvable), "--out", str(tmp_path / "s.json")]) == 3
    assert main(["dump", "--config", str(escape), "--riemann-at", "1,2", "--out", "x"]) == 2
    assert "otgeo:" in capsys.readouterr().err

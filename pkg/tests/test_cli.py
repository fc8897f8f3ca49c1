import csv
import json

import numpy as np
import pytest

from dpp_obstacle.cli import BENCH_HEADER, BENCH_P_HEADER, SOLUTION_HEADER, main, read_solution_csv
from dpp_obstacle.config import parse_config, resolve_problem
from dpp_obstacle.dpp import coefficients, residual
from dpp_obstacle.errors import ConfigTypeError, MissingRequired, UnknownKey
from dpp_obstacle.fields import ProblemSpec, ScalarField
from dpp_obstacle.mesh import build_mesh


def test_precedence(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("dataset: try1_p2\ntolerance: 1.0e-3\nh: 0.1\n")
    cfg = parse_config("solve", path, ["tol=1e-6"])
    assert cfg.tolerance == 1e-6 and cfg.h == 0.1
    assert cfg.collar == 0.2 and cfg.radius_in_mesh_units == 3


def test_dataset_exponent():
    cfg = parse_config("solve", None, ["dataset=case_a_p10"])
    assert resolve_problem(cfg).p == 10


def test_inline_problem():
    cfg = parse_config("solve", None, ["p=3", "psi1=-1", "psi2=x^2+2", "f=0"])
    spec = resolve_problem(cfg)
    assert spec.p == 3 and spec.psi2(0.5, 0.0) == 2.25


def test_bench_has_its_own_spacing_default():
    assert parse_config("bench").h == 0.0125
    assert parse_config("bench", None, ["h=0.05"]).h == 0.05


@pytest.mark.parametrize("overrides,exc", [
    (["dataset=try1_p2", "colour=red"], UnknownKey),
    (["dataset=try1_p2", "h=fine"], ConfigTypeError),
    (["dataset=try1_p2", "h=-0.1"], ConfigTypeError),
    (["dataset=try1_p2", "max_iterations=2.5"], ConfigTypeError),
    (["dataset=try1_p2", "probes=[[0, 0, 1]]"], ConfigTypeError),
    ([], MissingRequired),
    (["psi1=0", "psi2=1", "f=0.5"], MissingRequired),
    (["dataset=try1_p2", "psi1=0"], ConfigTypeError),
])
def test_config_errors(overrides, exc):
    with pytest.raises(exc):
        parse_config("solve", None, overrides)


def test_unknown_key_in_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("dataset: try1_p2\nbogus: 1\n")
    with pytest.raises(UnknownKey):
        parse_config("solve", path)


def _solve(out, *extra):
    return main(["solve", "--set", "dataset=case_b_p10", "--set", "h=0.05", "--set", "tol=1e-8",
                 "--out", str(out), *extra])


def test_solution_csv_round_trip(tmp_path):
    assert _solve(tmp_path) == 0
    with open(tmp_path / "solution.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert header == SOLUTION_HEADER
    data = read_solution_csv(tmp_path / "solution.csv")
    cfg = parse_config("solve", None, ["dataset=case_b_p10", "h=0.05"])
    mesh = build_mesh(cfg.h, cfg.a, cfg.collar, cfg.eps)
    assert len(data["u"]) == mesh.n_nodes
    np.testing.assert_array_equal(data["x"], mesh.nodes[:, 0])
    assert set(data["class"]) == {"interior", "collar"}
    assert np.array_equal(data["class"] == "interior", mesh.interior)
    spec = resolve_problem(cfg)
    report = json.loads((tmp_path / "report.json").read_text())
    res = residual(mesh, coefficients(spec.p), spec, data["u"])
    assert res <= report["solve"]["final_gap"] + 1e-12
    assert abs(res - report["solve"]["residual"]) <= 1e-12


def _strip_times(obj):
    if isinstance(obj, dict):
        return {k: _strip_times(v) for k, v in obj.items() if k not in ("wall_time", "runtime_s")}
    if isinstance(obj, list):
        return [_strip_times(v) for v in obj]
    return obj


def test_report_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _solve(a) == 0 and _solve(b) == 0
    ra = json.loads((a / "report.json").read_text())
    rb = json.loads((b / "report.json").read_text())
    ra["config"].pop("out"), rb["config"].pop("out")
    assert _strip_times(ra) == _strip_times(rb)
    assert (a / "solution.csv").read_bytes() == (b / "solution.csv").read_bytes()


def test_simulate_and_validate(tmp_path):
    code = main(["simulate", "--set", "dataset=case_b_p10", "--set", "h=0.05", "--set", "tol=1e-6",
                 "--set", "runs=2000", "--set", "probes=[[0, 0], [0.2, -0.3]]", "--out", str(tmp_path / "s")])
    assert code == 0
    rep = json.loads((tmp_path / "s" / "report.json").read_text())
    assert len(rep["simulate"]) == 2
    for est in rep["simulate"]:
        assert abs(est["mean"] - est["u"]) <= 5 * est["stderr"] + 5e-3
    code = main(["validate", "--set", "dataset=harmonic_quadratic_p2", "--set", "h=0.05", "--set", "tol=1e-8",
                 "--out", str(tmp_path / "v")])
    assert code == 0
    rep = json.loads((tmp_path / "v" / "report.json").read_text())
    assert rep["validate"]["known_solution_error"] <= 1e-6
    assert rep["validate"]["fd_p_laplace_residual_max"] <= 1e-4


@pytest.mark.slow
def test_bench_outputs(tmp_path):
    code = main(["bench", "--set", "h=0.025", "--set", "collar=0.4", "--set", "error_tolerance=1e-6",
                 "--set", "bench_datasets=[try1_p2]", "--set", "p_values=[50]", "--set", "radius=15", "--set", "tol=1e-2",
                 "--out", str(tmp_path)])
    assert code == 0
    with open(tmp_path / "bench.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == BENCH_HEADER
    assert [int(r[1]) for r in rows[1:]] == [709, 317, 81, 29]
    assert [int(r[0]) for r in rows[1:]] == [15, 10, 5, 3]
    with open(tmp_path / "bench_p.csv", newline="") as fh:
        prow = list(csv.reader(fh))
    assert prow[0] == BENCH_P_HEADER and [float(r[0]) for r in prow[1:]] == [50.0]


def test_exit_codes(tmp_path):
    assert main(["solve", "--set", "colour=red"]) == 2
    assert main(["solve", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert main(["solve", "--set", "dataset=nope", "--out", str(tmp_path / "x")]) == 2
    assert main(["solve", "--set", "dataset=try1_p2", "--set", "h=0.05", "--set", "max_iterations=2",
                 "--set", "tol=1e-12", "--out", str(tmp_path / "y")]) == 3
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["solve", "--set", "dataset=try1_p2", "--set", "h=0.05", "--out", str(blocker / "sub")]) == 4

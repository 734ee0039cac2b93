import csv
import json

import numpy as np
import pytest

from gmkeldysh.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, main
from gmkeldysh.config import DEFAULTS, parse_config
from gmkeldysh.coefficients import preset
from gmkeldysh.errors import ConfigError
from gmkeldysh.geometry import DomainSpec
from gmkeldysh.verify import verify


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _run(tmp_path, command, cfg=None, *extra, out="out"):
    args = [command, "--out", str(tmp_path / out)]
    if cfg is not None:
        args += ["--config", _write(tmp_path, cfg)]
    return main(args + list(extra))


def test_config_defaults():
    cfg = parse_config({})
    assert cfg.raw == DEFAULTS
    assert cfg.domain == DomainSpec()
    assert cfg.coefficients == preset("default")


@pytest.mark.parametrize(
    "bad,where",
    [
        ({"unknown": 1}, "<root>"),
        ({"domain": {"epsilon_cap": 0.5}}, "domain/epsilon_cap"),
        ({"domain": {"delta_corner": -0.1}}, "domain/delta_corner"),
        ({"mesh": {"n_theta": 8}}, "mesh/n_theta"),
        ({"coefficients": {"preset": "nope"}}, "coefficients/preset"),
        ({"coefficients": {"gamma1": [[0, 0]]}}, "coefficients/gamma1"),
        ({"solver": {"tol": 0}}, "solver/tol"),
        ({"convergence": {"levels": 2}}, "convergence/levels"),
    ],
)
def test_config_errors_name_location(bad, where):
    with pytest.raises(ConfigError, match=where):
        parse_config(bad)


def test_config_polynomial_override():
    cfg = parse_config({"coefficients": {"preset": "default", "Gamma2": [[1, 1, 0.5]]}})
    v = cfg.coefficients.evaluate(np.array([0.4]), np.array([0.5]))
    assert v.Gamma2[0] == pytest.approx(0.1)


def test_verify_default_passes(tmp_path, capsys):
    assert _run(tmp_path, "verify") == EXIT_PASS
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["overall"] == "pass"
    assert all(c["anchor"] for c in report["checks"])
    assert (tmp_path / "out" / "admissibility.json").exists()
    assert "overall: pass" in capsys.readouterr().out


def test_verify_gamma1_zero_fails_on_q(tmp_path):
    assert _run(tmp_path, "verify", {"coefficients": {"gamma1": 0}}) == EXIT_FAIL
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["overall"] == "fail"
    assert report["first_failure"] == "Q positive definite"


def test_verify_sharp_corner_fails(tmp_path, capsys):
    assert _run(tmp_path, "verify", {"domain": {"delta_corner": 0.0}}) == EXIT_FAIL
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    assert failed == ["corner smoothing"]
    assert "corner smoothing" in capsys.readouterr().err


def test_verify_triangular_fillet_split_fails(tmp_path):
    assert _run(tmp_path, "verify", {"domain": {"fillet_split": "triangular"}}) == EXIT_FAIL
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["first_failure"] == "range condition"


def test_config_error_exit_code(tmp_path, capsys):
    assert _run(tmp_path, "verify", {"mesh": {"n_theta": "many"}}) == EXIT_USAGE
    assert "mesh/n_theta" in capsys.readouterr().err
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    assert main(["verify", "--config", str(bad)]) == EXIT_USAGE
    assert main(["verify", "--config", str(tmp_path / "missing.json")]) == EXIT_USAGE


def test_usage_error_exit_code():
    assert main([]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["verify", "--samples", "4"]) == EXIT_USAGE


def test_samples_and_seed_flags(tmp_path):
    assert _run(tmp_path, "verify", None, "--samples", "512", "--seed", "3") == EXIT_PASS
    data = json.loads((tmp_path / "out" / "admissibility.json").read_text())
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert data["summary"]["n_samples"] == 512
    assert report["config"]["seed"] == 3


def test_mesh_command(tmp_path):
    assert _run(tmp_path, "mesh", {"mesh": {"n_theta": 32, "n_r": 8}}) == EXIT_PASS
    out = tmp_path / "out"
    with open(out / "boundary.csv") as fh:
        rows = list(csv.DictReader(fh))
    # the boundary loop closes
    assert all(rows[k]["v1"] == rows[(k + 1) % len(rows)]["v0"] for k in range(len(rows)))
    report = json.loads((out / "report.json").read_text())
    assert report["n_vertices"] == 1 + 32 * 8


def test_solve_command_nonzero_solution(tmp_path, capsys):
    # F = (1, 0) with homogeneous boundary data
    assert _run(tmp_path, "solve", {"mesh": {"n_theta": 32, "n_r": 8}}) == EXIT_PASS
    data = np.loadtxt(tmp_path / "out" / "solution.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(data[:, 2])) > 0.1
    assert "energy:" in capsys.readouterr().out
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert set(report["energy_report"]) == {"volume_term", "boundary_term", "source_term", "defect"}


def test_convergence_command(tmp_path):
    assert _run(tmp_path, "convergence") == EXIT_PASS
    data = np.loadtxt(tmp_path / "out" / "convergence.csv", delimiter=",", skiprows=1)
    assert np.all(np.diff(data[:, 1]) < 0)


def test_solver_error_exit_code(tmp_path, capsys):
    cfg = {"mesh": {"n_theta": 32, "n_r": 8}, "solver": {"max_iter": 3}}
    assert _run(tmp_path, "solve", cfg) == EXIT_FAIL
    assert "NonConvergenceError" in capsys.readouterr().err


@pytest.mark.parametrize("command", ["verify", "mesh", "solve"])
def test_outputs_deterministic(tmp_path, command):
    cfg = {"mesh": {"n_theta": 32, "n_r": 8}, "sampling": {"boundary_samples": 256, "interior_samples": 256}}
    _run(tmp_path, command, cfg, out="a")
    _run(tmp_path, command, cfg, out="b")
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "report.json" in files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_verify_report_structure():
    report, _ = verify(DomainSpec(), preset("default"), boundary_samples=256, interior_samples_count=256)
    names = [c.name for c in report.checks]
    assert names[:3] == ["coefficients finite", "Q positive definite", "coefficient bound"]
    assert {"range condition", "span condition", "singularity removal", "corner smoothing"} <= set(names)
    assert report.passed == all(c.passed for c in report.checks)
    assert report.get("y^2 bounded below 1").worst_value == pytest.approx(0.95, abs=1e-3)


def test_verify_flags_unbounded_coefficients():
    c = preset("default", Gamma1=lambda x, y: 1.0 / x)
    report, _ = verify(DomainSpec(), c, boundary_samples=256, interior_samples_count=256)
    assert report.first_failure.name in ("coefficients finite", "Q positive definite")

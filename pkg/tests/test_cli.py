import json

import pytest

import brinkman.cli as cli
from brinkman.cli import main
from brinkman.config import ConfigError, RunConfig, r_ladder, read_flat_config
from brinkman.solver import SolverError


def error_line(capsys):
    return capsys.readouterr().err.strip().splitlines()[-1]


def test_unknown_subcommand(capsys):
    assert main(["frobnicate"]) == 2
    assert error_line(capsys).startswith("error: code=2 kind=usage")


def test_bad_flag(capsys):
    assert main(["solve", "--R", "abc"]) == 2
    assert main(["study", "--preset", "paper-channel", "--rmin", "10", "--rmax", "1"]) == 2
    assert "code=2" in error_line(capsys)


def test_mesh_and_preset_conflict(tmp_path, capsys):
    assert main(["solve", "--mesh", str(tmp_path / "m.msh"), "--preset", "channel"]) == 2


def test_missing_mesh_file(tmp_path, capsys):
    assert main(["solve", "--mesh", str(tmp_path / "missing.msh")]) == 4
    assert "kind=io" in error_line(capsys)


def test_malformed_mesh_file(tmp_path, capsys):
    bad = tmp_path / "bad.msh"
    bad.write_text("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n")
    assert main(["mesh", "--mesh", str(bad), "--out", str(tmp_path)]) == 4
    assert "kind=mesh" in error_line(capsys)


def test_unavailable_fixture_size(capsys):
    assert main(["solve", "--preset", "paper-channel", "--h", "0.1"]) == 2


def test_solver_failure_exit_code(tmp_path, capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise SolverError("direct solve inaccurate")

    monkeypatch.setattr(cli, "solve_stokes", boom)
    assert main(["solve", "--preset", "channel", "--h", "0.25", "--out", str(tmp_path)]) == 3
    assert error_line(capsys) == "error: code=3 kind=solver message=direct solve inaccurate"


def test_newton_failure_exit_code(tmp_path, capsys):
    # a far too fast inflow on a coarse grid makes Newton give up
    argv = ["solve", "--preset", "channel", "--h", "0.5", "--equation", "navier-stokes", "--U", "1e7",
            "--nu", "1e-3", "--out", str(tmp_path)]
    assert main(argv) == 3
    assert "kind=solver" in error_line(capsys)


def test_mesh_subcommand(tmp_path, capsys):
    assert main(["mesh", "--preset", "rect-channel", "--h", "0.1", "--out", str(tmp_path)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["euler_ok"] and info["holes"] == 0
    assert (tmp_path / "rect-channel.msh").exists()
    assert main(["mesh", "--mesh", str(tmp_path / "rect-channel.msh"), "--out", str(tmp_path / "again")]) == 0


def test_solve_navier_stokes_outputs(tmp_path, capsys):
    argv = ["solve", "--preset", "rect-channel", "--h", "0.1", "--equation", "navier-stokes", "--R", "1e4",
            "--out", str(tmp_path)]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert out.startswith("flux inflow=")
    diag = json.loads((tmp_path / "navier-stokes_penalized_R10000.json").read_text())
    assert abs(diag["flux_inflow"] + diag["flux_outflow"]) < 1e-8 * abs(diag["flux_inflow"])
    assert diag["newton_iterations"] >= 1
    assert (tmp_path / "navier-stokes_penalized_R10000.vtk").exists()


def test_solve_reference(tmp_path, capsys):
    assert main(["solve", "--preset", "paper-channel", "--h", "0.2", "--scenario", "reference",
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "stokes_reference.vtk").exists()


def test_study_on_coarse_fixture(tmp_path, capsys):
    assert main(["study", "--preset", "paper-channel", "--h", "0.2", "--rmax", "1e8", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "study_stokes.csv").read_text().splitlines()
    assert len(rows) == 1 + 9
    assert "Penalty convergence history" in (tmp_path / "study_stokes.md").read_text()


def test_config_file_with_override(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("# sweep\npreset = rect-channel\nh = 0.1\nrmin = 1\nrmax = 100\nU = 10\n")
    assert main(["study", "--config", str(conf), "--rmax", "1000", "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "study_stokes.csv").read_text().splitlines()) == 1 + 4


def test_config_unknown_key(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("speed = 3\n")
    assert main(["solve", "--config", str(conf)]) == 2


def test_flat_config_parsing(tmp_path):
    conf = tmp_path / "c.conf"
    conf.write_text("--rmax = 1e4  # comment\n\nnu=2\n")
    assert read_flat_config(conf) == {"rmax": "1e4", "nu": "2"}
    conf.write_text("novalue\n")
    with pytest.raises(ConfigError):
        read_flat_config(conf)


def test_r_ladder():
    assert r_ladder(1, 1e3) == (1.0, 10.0, 100.0, 1000.0)
    assert len(r_ladder(1, 1e10)) == 11
    assert r_ladder(1, 8, 4) == pytest.approx((1, 2, 4, 8))
    with pytest.raises(ConfigError):
        r_ladder(1, 5)


def test_default_run_config():
    run = RunConfig()
    assert run.preset == "paper-channel"
    assert run.R_values[0] == 1.0 and run.R_values[-1] == 1e10


@pytest.mark.slow
def test_study_default_fixture_rows(tmp_path, capsys):
    assert main(["study", "--equation", "stokes", "--preset", "paper-channel", "--rmax", "1e8",
                 "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "study_stokes.csv").read_text().splitlines()) == 1 + 9


@pytest.mark.slow
def test_solve_navier_stokes_default_fixture(tmp_path, capsys):
    assert main(["solve", "--equation", "navier-stokes", "--R", "1e6", "--preset", "paper-channel",
                 "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("flux inflow=")
    vtk = (tmp_path / "navier-stokes_penalized_R1e+06.vtk").read_text()
    assert "VECTORS velocity double" in vtk

import json
import subprocess
import sys

import pytest

from pseudostress.cli import main


def _err(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_solve_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["solve", "--domain", "square", "--nu", "0.35", "--k", "0", "--N", "8", "--nev", "3",
                 "--formats", "json,csv,vtk", "--out", str(out)])
    assert code == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["frequencies.csv", "mode1.png", "mode2.png", "mode3.png", "modes.vtk", "solution.json"]
    doc = json.loads((out / "solution.json").read_text())
    assert doc["config"]["nu"] == [0.35] and doc["schema_version"] == 1
    assert "mode 1: omega" in capsys.readouterr().out


def test_solve_limit_dispatch(tmp_path):
    out = tmp_path / "lim"
    assert main(["solve", "--nu", "0.5", "--N", "6", "--nev", "2", "--no-plots", "--out", str(out)]) == 0
    doc = json.loads((out / "solution.json").read_text())
    assert len(doc["modes"]) >= 2


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--nu", "0.6"],
        ["solve", "--k", "3"],
        ["solve", "--N", "0"],
        ["solve", "--nu", "0.3,0.4"],
        ["solve", "--formats", "xml"],
        ["study", "--N", "10,20"],
        ["study", "--N", "10,30,20"],
        ["study", "--domain", "imported", "--mesh-file", "x", "--N", "1,2,3"],
        ["solve", "--domain", "imported"],
        ["solve", "--mesh-file", "foo.mesh"],
    ],
)
def test_validation_errors(argv, tmp_path, capsys):
    out = tmp_path / "never"
    assert main(argv + ["--out", str(out)]) == 2
    rec = _err(capsys)
    assert rec["error"] == "invalid_config" and rec["stage"] == "validate"
    assert not out.exists()


def test_run_failure_record(tmp_path, capsys):
    code = main(["solve", "--domain", "imported", "--mesh-file", str(tmp_path / "missing.mesh"), "--out", str(tmp_path)])
    assert code == 1
    rec = _err(capsys)
    assert rec["error"] == "run_failed" and rec["type"] == "MeshError"


def test_study(tmp_path, capsys):
    out = tmp_path / "st"
    assert main(["study", "--nu", "0.35", "--k", "0", "--N", "4,6,8", "--nev", "2", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["relerr_nu0.35_k0.png", "study.csv", "study.json", "study.txt"]
    assert "Order" in capsys.readouterr().out
    doc = json.loads((out / "study.json").read_text())
    assert doc["config"]["N"] == [4, 6, 8]


def test_export_mesh_and_import(tmp_path):
    assert main(["export-mesh", "--domain", "disk", "--N", "2", "--out", str(tmp_path)]) == 0
    path = tmp_path / "disk_N2.mesh"
    assert path.read_text().startswith("mesh 2 tri\nvertices 25\n")
    out = tmp_path / "imp"
    assert main(["solve", "--domain", "imported", "--mesh-file", str(path), "--nev", "2", "--no-plots",
                 "--out", str(out)]) == 0


def test_dump_matrices(tmp_path):
    assert main(["dump-matrices", "--N", "2", "--k", "1", "--out", str(tmp_path)]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["A.mtx", "B.mtx", "M.mtx", "c.mtx"]


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "pseudostress", "solve", "--nu", "0.7", "--out", str(tmp_path / "x")],
                         capture_output=True, text=True)
    assert res.returncode == 2
    assert json.loads(res.stderr)["error"] == "invalid_config"


def test_identical_config_identical_files(tmp_path):
    args = ["study", "--domain", "disk", "--nu", "0.3", "--k", "1", "--N", "2,3,4", "--nev", "2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("study.csv", "study.json", "study.txt", "relerr_nu0.3_k1.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

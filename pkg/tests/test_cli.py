import json
import subprocess
import sys

import pytest

from chifourier import cli

DISK = {"type": "disk", "center": [0.5, 0.5], "radius": 0.25}


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps({"name": "small", "shape": DISK, "grid": {"n": 256}, "block_window": [2, 5],
                                "checks": ["boundary", "blocks"]}))
    return path


def test_verify_all_exit_zero_and_outputs(small, tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(["verify-all", "--config", str(small), "--out", str(out)]) == 0
    assert "overall: pass" in capsys.readouterr().out
    rep = json.loads((out / "report.json").read_text())
    assert rep["summary"]["passed"] == ["blocks", "boundary"]


def test_global_flags_before_the_subcommand(small, tmp_path):
    out = tmp_path / "run"
    assert cli.main(["--config", str(small), "--out", str(out), "gamma-fit"]) == 0
    assert (out / "boundary.json").exists()


def test_failing_check_exits_one(tmp_path, capsys):
    # a weak-norm certificate over too few octaves fails on its span
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"name": "c", "shape": DISK, "n": 128, "checks": ["weak_norm"]}))
    assert cli.main(["weak-norm", "--config", str(path)]) == 1
    assert "weak_norm: fail" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["verify-all"],
    ["verify-all", "--config", "/nonexistent.json"],
    ["verify-all", "--seed", "-1", "--config", "x.json"],
])
def test_config_errors_exit_two(argv):
    assert cli.main(argv) == 2


def test_invalid_config_contents_exit_two(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"name": "bad", "shape": DISK, "n": 100}))
    assert cli.main(["rasterize", "--config", str(path)]) == 2


def test_phi_check_without_config(tmp_path, capsys):
    assert cli.main(["phi-check", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "phi.json").exists() and (tmp_path / "psi0_hat.csv").exists()


def test_small_commands(small, tmp_path, capsys):
    out = tmp_path / "o"
    for cmd in ("rasterize", "boundary-profile", "spectrum", "decay-fit", "lp-decompose"):
        assert cli.main([cmd, "--config", str(small), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "raster area" in text and "chi_hat(0)" in text and "envelope exponent" in text
    for f in ("indicator.cfl", "boundary_profile.csv", "spectrum.cfl", "decay_fit.json", "lp_pieces.csv"):
        assert (out / f).exists()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "chifourier", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "verify-all" in res.stdout

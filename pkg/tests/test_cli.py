import json
import subprocess
import sys

import pytest

from ptconserve import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_help_documents_units(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["evolve", "--help"])
    assert exc.value.code == 0
    assert "1/J" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ptconserve", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "ptconserve" in res.stdout


def test_spectrum_at_ep(tmp_path, capsys):
    code, out, _ = run(["spectrum", "--gamma", "1", "--out", str(tmp_path)], capsys)
    assert code == 0
    phase = json.loads(out)["phase"]
    assert phase["phase"] == "exceptional_point" and phase["ep_order"] == 4
    assert (tmp_path / "spectrum.csv").exists() and (tmp_path / "spectrum.json").exists()


def test_spectrum_reports_period(tmp_path, capsys):
    code, out, _ = run(["spectrum", "--gamma", "0.2", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert json.loads(out)["period"] == pytest.approx(6.4127, abs=1e-4)


def test_conserved(tmp_path, capsys):
    code, out, _ = run(["conserved", "--gamma", "0.5", "--state", "psi2", "--out", str(tmp_path)], capsys)
    assert code == 0
    res = json.loads(out)
    assert res["gram_rank"] == 4 and res["oracle_dimension"] == 4
    assert res["max_principal_angle"] < 1e-8
    assert res["expectations"][0] == pytest.approx(1.0)
    assert sorted(p.name for p in tmp_path.glob("eta_*.csv")) == [f"eta_{i}.csv" for i in range(1, 5)]


def test_evolve_with_config_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("gamma = 0.2\nstate = psi3\ntmax = 4\nsamples = 50\n")
    out_dir = tmp_path / "out"
    code, out, _ = run(["evolve", "--config", str(cfg), "--gamma", "1.2", "--out", str(out_dir)], capsys)
    assert code == 0
    assert "phase: pt_broken" in out
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["config"]["gamma"] == 1.2
    assert summary["config"]["state"] == "psi3"
    assert (out_dir / "trajectory.csv").exists()


def test_fit_at_ep(tmp_path, capsys):
    code, out, _ = run(["fit", "--gamma", "1", "--out", str(tmp_path)], capsys)
    assert code == 0
    fits = json.loads(out)
    assert fits["expected_exponent"] == 6
    assert fits["norm_power_law"]["value"] == pytest.approx(5.909, abs=1e-3)


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("d = 4\ngamma = fast\n")
    code, _, err = run(["evolve", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 2
    assert f"{cfg}:2:" in err


def test_bad_flag_value_exit_code(tmp_path, capsys):
    code, _, err = run(["spectrum", "--d", "1", "--out", str(tmp_path)], capsys)
    assert code == 2 and "--d" in err


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(["spectrum", "--config", str(tmp_path / "nope.cfg")], capsys)
    assert code == 2 and "cannot read config" in err


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["repro", "fig9"])
    assert exc.value.code == 2


def test_numerical_error_exit_code(tmp_path, capsys):
    code, _, err = run(["evolve", "--gamma", "1", "--state", "E2", "--out", str(tmp_path)], capsys)
    assert code == 1
    assert "DefectiveEigenbasis" in err and "[model]" in err


def test_repro_passing_figure(tmp_path, capsys):
    code, out, _ = run(["repro", "fig3eg", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert out.count("PASS") == 2 and "FAIL" not in out
    assert (tmp_path / "fig3eg.csv").exists()

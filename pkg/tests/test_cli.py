import json

import pytest

from cavitybec.cli import main
from cavitybec.io import read_csv


def run(tmp_path, *argv):
    return main([*argv, "--output-dir", str(tmp_path)])


def test_meanfield_single_state(tmp_path):
    assert run(tmp_path, "meanfield", "--eta", "283.8", "--delta-c", "27000") == 0
    cols, rows = read_csv(tmp_path / "meanfield.csv")
    assert "abs_alpha_sq" in cols and len(rows) == 1
    assert float(rows[0][cols.index("converged")]) == 1
    assert (tmp_path / "wavefunction.csv").exists()
    log = (tmp_path / "convergence.log").read_text()
    assert log.startswith("# params: ") and "converged True" in log


def test_meanfield_without_light_shift_is_homogeneous(tmp_path):
    assert run(tmp_path, "meanfield", "--u0", "0") == 0
    cols, rows = read_csv(tmp_path / "meanfield.csv")
    assert float(rows[0][cols.index("mu")]) == 0.0
    assert float(rows[0][cols.index("beta1_sq")]) == 0.0


def test_meanfield_grid_logs_energy(tmp_path):
    assert run(tmp_path, "meanfield", "--representation", "grid", "--n-points", "32") == 0
    log = (tmp_path / "convergence.log").read_text()
    assert "representation grid" in log and "energy" in log
    cols, rows = read_csv(tmp_path / "wavefunction.csv")
    assert cols == ["x", "psi"] and len(rows) == 32


def test_meanfield_sweep_header_and_determinism(tmp_path):
    argv = ("meanfield", "--eta", "283.8", "--n-steps", "40")
    assert run(tmp_path / "a", *argv) == 0
    assert run(tmp_path / "b", *argv) == 0
    a = (tmp_path / "a" / "fig2.csv").read_text()
    assert a == (tmp_path / "b" / "fig2.csv").read_text()
    assert a.startswith("# params: n_atoms=")
    assert "eta=2.8380000000000001e+02" in a and "n_steps=40" in a


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("eta = 283.8\ndelta_c = 27000\nformat = json\n")
    assert run(tmp_path, "meanfield", "--config", str(cfg), "--eta", "100") == 0
    data = json.loads((tmp_path / "meanfield.json").read_text())
    assert data["params"]["eta"] == 100.0
    assert data["params"]["delta_c"] == 27000.0


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("etaa = 1\n")
    assert run(tmp_path, "meanfield", "--config", str(cfg)) == 2
    assert "unknown config key" in capsys.readouterr().err


def test_missing_config_prints_usage(tmp_path, capsys):
    assert run(tmp_path, "meanfield", "--config", str(tmp_path / "nope.cfg")) == 2
    assert "usage" in capsys.readouterr().err


def test_invalid_parameter_is_usage_error(tmp_path):
    assert run(tmp_path, "meanfield", "--kappa", "-1") == 2


def test_bad_flag_exits_2(tmp_path):
    with pytest.raises(SystemExit) as err:
        run(tmp_path, "meanfield", "--no-such-flag")
    assert err.value.code == 2


def test_spectrum_heating_point_flagged(tmp_path, capsys):
    assert run(tmp_path, "spectrum", "--delta-c", "29000", "--check-symmetry") == 0
    assert "symmetry residual" in capsys.readouterr().out
    text = (tmp_path / "fig4.csv").read_text()
    assert "unstable" in text


def test_correlations_heating_point_fails(tmp_path, capsys):
    assert run(tmp_path, "correlations", "--delta-c", "29000") == 1
    assert "no steady state" in capsys.readouterr().err


def test_correlations_sweep_with_oracle(tmp_path, capsys):
    assert run(tmp_path, "correlations", "--n-steps", "20", "--oracle", "lyapunov") == 0
    out = capsys.readouterr().out
    worst = float(out.split("=")[1].split()[0])
    assert worst < 1e-8
    cols, rows = read_csv(tmp_path / "fig6-8.csv")
    assert cols[:3] == ["delta_c", "n_ph_classical", "n_ph_nonclassical"]
    assert rows


def test_correlations_need_two_mode(tmp_path):
    assert run(tmp_path, "correlations", "--representation", "grid") == 2


def test_phasediagram_with_critical_point(tmp_path, capsys):
    argv = ("phasediagram", "--n-delta", "12", "--n-eta", "6", "--eta-max", "500",
            "--threads", "2", "--find-critical")
    assert run(tmp_path, *argv) == 0
    assert "critical point" in capsys.readouterr().out
    cols, rows = read_csv(tmp_path / "fig5.csv")
    assert cols == ["delta_c", "eta", "class"] and len(rows) == 72
    assert "# critical point" in (tmp_path / "fig5.csv").read_text()


def test_phasediagram_empty_eta_range(tmp_path):
    assert run(tmp_path, "phasediagram", "--eta-min", "5", "--eta-max", "1") == 2

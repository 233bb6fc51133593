import csv
import json
import subprocess
import sys

import pytest

from kinklab import cli


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def load(out):
    return json.loads((out / "run.json").read_text())


def header(path):
    with open(path) as fh:
        return next(csv.reader(fh))


# ---------------------------------------------------------------- configuration


def test_config_file_and_overrides(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("# grid\nhalf_width = 30\ndx = 0.01  # coarse\n\ntrials = 20\n")
    cfg = cli.build_config("verify", cli.read_config_file(f), {"trials": "40"})
    assert cfg["half_width"] == 30.0 and cfg["dx"] == 0.01 and cfg["trials"] == 40
    assert cfg["dx_spectral"] == 0.01 and cfg["seed"] == 0


def test_bad_config_lines(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("half_width 30\n")
    with pytest.raises(cli.ConfigError):
        cli.read_config_file(f)
    with pytest.raises(cli.ConfigError):
        cli.read_config_file(tmp_path / "missing.cfg")


@pytest.mark.parametrize("overrides", [
    {"bogus": "1"}, {"dx": "-0.1"}, {"dx": "abc"}, {"tol.nothing": "1e-3"}, {"tol.g_ode": "0"},
])
def test_build_config_rejects(overrides):
    with pytest.raises(cli.ConfigError):
        cli.build_config("verify", None, overrides)


def test_auto_values_and_speed_lists():
    cfg = cli.build_config("collide", None, {"t_span": "auto", "gate": "no"})
    assert cfg["t_span"] is None and cfg["gate"] is False
    cfg = cli.build_config("sweep", None, {"v_list": "0.05, 0.1,0.2"})
    assert cfg["v_list"] == [0.05, 0.1, 0.2]
    with pytest.raises(cli.ConfigError):
        cli.build_config("sweep", None, {"v_list": "0.1,0.2"})
    with pytest.raises(cli.ConfigError):
        cli.build_config("residual", None, {"v_list": "0.1,0.5"})


def test_worker_count(monkeypatch):
    monkeypatch.setenv("KINKLAB_THREADS", "2")
    assert cli.worker_count(4) == 2
    assert cli.worker_count(1) == 1
    monkeypatch.setenv("KINKLAB_THREADS", "zero")
    with pytest.raises(cli.ConfigError):
        cli.worker_count(4)
    monkeypatch.setenv("KINKLAB_THREADS", "0")
    with pytest.raises(cli.ConfigError):
        cli.worker_count(4)


def test_usage_errors(tmp_path, capsys):
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["verify", "notkeyvalue"]) == 2
    assert "kinklab:" in capsys.readouterr().err


# ---------------------------------------------------------------- verify


def test_verify_passes(tmp_path):
    code, out = run(tmp_path, "verify", "trials=60")
    assert code == 0
    data = load(out)
    assert data["passed"] and data["results"]["n_passed"] >= 15
    assert header(out / "checks.csv") == ["name", "value", "reference", "error", "pass"]
    assert set(data["environment"]) >= {"python", "numpy", "scipy", "kinklab"}


def test_verify_unattainable_tolerance(tmp_path):
    code, out = run(tmp_path, "verify", "trials=20", "tol.g_ode=1e-15")
    assert code == 1
    assert load(out)["checks"]["g_ode"] is False


def test_verify_missing_grid(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("dx = 0.005\n")
    assert cli.main(["verify", "--config", str(f), "--out", str(tmp_path / "o")]) == 2
    f.write_text("dx = 0.005\nhalf_width = 40\n")
    assert cli.main(["verify", "--config", str(f), "trials=20", "--out", str(tmp_path / "o")]) == 0


# ---------------------------------------------------------------- residual


def test_residual(tmp_path):
    code, out = run(tmp_path, "residual")
    assert code == 0
    with open(out / "residual.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["v", "t", "res_bare", "res_corrected"]
    assert len(rows) == 10
    assert run(tmp_path, "residual", "v_list=0.1,0.4")[0] == 2


def test_residual_deterministic(tmp_path):
    _, a = run(tmp_path, "residual", "v_list=0.1,0.2", name="a")
    _, b = run(tmp_path, "residual", "v_list=0.1,0.2", name="b")
    assert (a / "residual.csv").read_bytes() == (b / "residual.csv").read_bytes()


# ---------------------------------------------------------------- ode-check


def test_ode_check(tmp_path):
    code, out = run(tmp_path, "ode-check")
    assert code == 0
    assert header(out / "trajectory.csv") == ["t", "e1", "e2", "xi1_dot", "xi2_dot"]
    assert run(tmp_path, "ode-check", "tol.wronskian=1e-30")[0] == 1
    assert run(tmp_path, "ode-check", "samples=0")[0] == 2


def test_ode_check_deterministic(tmp_path):
    _, a = run(tmp_path, "ode-check", name="a")
    _, b = run(tmp_path, "ode-check", name="b")
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()


# ---------------------------------------------------------------- spectrum


def test_spectrum(tmp_path):
    code, out = run(tmp_path, "spectrum", "kind=kink-pair", "x_min=-25", "x_max=37", "dx=0.02")
    assert code == 0
    assert header(out / "spectrum.csv") == ["index", "eigenvalue", "residual"]
    assert len(load(out)["results"]["eigenvalues"]) == 4
    assert run(tmp_path, "spectrum", "x_min=5", "x_max=-5")[0] == 2
    assert run(tmp_path, "spectrum", "kind=kink-pair", "z=1")[0] == 2
    assert run(tmp_path, "spectrum", "m=11")[0] == 2


def test_spectrum_deterministic(tmp_path):
    _, a = run(tmp_path, "spectrum", "dx=0.02", name="a")
    _, b = run(tmp_path, "spectrum", "dx=0.02", name="b")
    assert (a / "spectrum.csv").read_bytes() == (b / "spectrum.csv").read_bytes()


# ---------------------------------------------------------------- collide / sweep / orbital


def test_collide(tmp_path):
    code, out = run(tmp_path, "collide", "v=0.2", "gate=false")
    assert code == 0
    data = load(out)
    assert 0 < data["results"]["nu_f"] < 1
    assert header(out / "velocity.csv")[:3] == ["t", "v_hat", "y_hat"]
    assert header(out / "diagnostics.csv")[:7] == ["t", "E", "P", "E_plus", "P_plus", "phi0", "M_lyap"]


def test_collide_failure_and_usage(tmp_path):
    code, out = run(tmp_path, "collide", "v=0.2", "gate=false", "t_span=3", "length=60")
    assert code == 1
    assert load(out)["checks"]["fit_ok"] is False
    assert run(tmp_path, "collide", "v=0.5")[0] == 2
    assert run(tmp_path, "collide", "boundary=zero")[0] == 2


def test_sweep_failure_and_usage(tmp_path, monkeypatch):
    monkeypatch.setenv("KINKLAB_THREADS", "1")
    code, out = run(tmp_path, "sweep", "v_list=0.2,0.25,0.3", "gate=false", "t_span=3", "length=60")
    assert code == 1
    with open(out / "sweep.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == cli.SWEEP_HEADER and len(rows) == 4
    assert load(out)["checks"]["all_runs_ok"] is False
    assert run(tmp_path, "sweep", "v_list=0.1")[0] == 2
    monkeypatch.setenv("KINKLAB_THREADS", "-3")
    assert run(tmp_path, "sweep", "v_list=0.2,0.25,0.3", "gate=false", "t_span=3", "length=60")[0] == 2


def test_orbital(tmp_path):
    code, out = run(tmp_path, "orbital", "t_final=5", "length=80")
    assert code == 0
    assert header(out / "orbital.csv")[:3] == ["t", "v_hat", "y_hat"]
    assert run(tmp_path, "orbital", "t_final=5", "length=80", "c_max=1e-9")[0] == 1
    assert run(tmp_path, "orbital", "v0=0.5")[0] == 2


def test_orbital_deterministic(tmp_path):
    _, a = run(tmp_path, "orbital", "t_final=3", "length=80", "seed=7", name="a")
    _, b = run(tmp_path, "orbital", "t_final=3", "length=80", "seed=7", name="b")
    assert (a / "orbital.csv").read_bytes() == (b / "orbital.csv").read_bytes()


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "kinklab", "ode-check", "samples=10", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "checks passed" in r.stdout

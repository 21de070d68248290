import json

import numpy as np
import pytest

from degen_mixed import cli, storage


def write_cfg(path, **cfg):
    path.write_text(json.dumps(cfg))
    return str(path)


def test_certify_stokes_pass(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", recipe="stokes-mms", k=8)
    assert cli.main(["certify", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "certificate.json").read_text())
    cert = rep["certificate"]
    assert cert["passed"] and cert["gamma"] == 0.0
    for key in ("beta", "symmetry_residual_R", "symmetry_residual_A", "monotonicity_margin",
                "gamma", "alpha", "u0_kernel_distance", "g_regularity_declared", "verdict",
                "tolerances"):
        assert key in cert


def test_certify_fault_injection_exit_2(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", recipe="stokes-mms", k=4, zero_B_row=True)
    assert cli.main(["certify", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    cert = json.loads((tmp_path / "o" / "certificate.json").read_text())["certificate"]
    assert cert["verdict"]["H1"] is False


def test_certify_eddy_gamma_positive(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", recipe="eddy2d-conductor", k=8)
    assert cli.main(["certify", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    cert = json.loads((tmp_path / "o" / "certificate.json").read_text())["certificate"]
    assert cert["gamma"] > 0 and cert["alpha"] > 0


def test_run_eddy_outputs(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", recipe="eddy2d-conductor", k=8, dt=1 / 64)
    out = tmp_path / "o"
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 0
    energy = json.loads((out / "energy.json").read_text())["energy"]
    assert energy["max_lambda_norm"] <= 1e-8 * energy["max_u_norm"]
    assert energy["max_lambda_norm_recovered"] <= 1e-8 * energy["max_u_norm"]
    assert np.isfinite(energy["empirical_C"])
    assert storage.read_trajectory(out / "trajectory.csv").shape == (65, 4)


def test_run_zero_data_all_zero(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", recipe="synthetic-random", n=6, m=2, dt=0.125,
                    zero_data=True, save_state=True)
    out = tmp_path / "o"
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 0
    table = storage.read_trajectory(out / "trajectory.csv")
    assert np.all(table[:, 1:] == 0.0)
    state = np.loadtxt(out / "state.csv", delimiter=",", skiprows=1)
    assert np.all(state[:, 1:] == 0.0)


def test_run_step_matrix_singular_exit_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", recipe="eddy2d-conductor", k=4, dt=1.0)
    out = tmp_path / "o"
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 2
    assert "dt*gamma" in capsys.readouterr().err
    assert not (out / "trajectory.csv").exists()


def test_run_stokes_logs_errors(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", recipe="stokes-mms", k=4, T=1.0, dt=0.01)
    out = tmp_path / "o"
    assert cli.main(["run", "--config", cfg, "--out", str(out), "--scheme",
                     "crank-nicolson"]) == 0
    energy = json.loads((out / "energy.json").read_text())["energy"]
    assert energy["scheme"] == "crank-nicolson"
    assert all(np.isfinite(v) for v in energy["errors"].values())


def test_io_errors_exit_1(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    bad = write_cfg(tmp_path / "b.json", recipe="stokes-mms", dt=0.3, k=4)
    assert cli.main(["run", "--config", bad, "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o" / "trajectory.csv").exists()
    bad = write_cfg(tmp_path / "u.json", recipe="nope")
    assert cli.main(["certify", "--config", bad]) == 1
    bad = write_cfg(tmp_path / "k.json", recipe="stokes-mms", bogus=1)
    assert cli.main(["certify", "--config", bad]) == 1
    assert cli.main(["certify"]) == 1


def test_config_overrides(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", recipe="stokes-mms", params={"nu": 2.0}, dt=0.1)
    c = cli.load_config(cfg, {"k": "4,8", "dt": 0.05, "scheme": None, "out": "x"})
    assert c["k_list"] == [4, 8] and c["params"] == {"nu": 2.0, "k": 8}
    assert c["dt"] == 0.05 and c["out"] == "x" and c["scheme"] == "backward-euler"
    with pytest.raises(cli.ConfigError):
        cli.load_config(cfg, {"k": "8,4"})


def test_convergence_small(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", recipe="stokes-nonsolenoidal", T=0.25,
                    dt_list=[0.05, 0.025, 0.0125])
    out = tmp_path / "o"
    assert cli.main(["convergence", "--config", cfg, "--k", "4,8", "--out", str(out)]) == 0
    lines = (out / "rates.csv").read_text().splitlines()
    assert lines[0] == "study,k,h,dt,error,rate,max_constraint_residual"
    rows = [line.split(",") for line in lines[1:]]
    assert [r[0] for r in rows] == ["spatial", "spatial", "temporal", "temporal"]
    assert float(rows[1][5]) >= 1.8
    assert all(float(r[6]) <= 1e-10 for r in rows)
    assert "spatial" in capsys.readouterr().out


def test_convergence_rejects_recipe_without_exact_solution(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", recipe="eddy2d-conductor")
    assert cli.main(["convergence", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_demo(tmp_path):
    assert cli.main(["demo", "--out", str(tmp_path)]) == 0
    for recipe in ("stokes-mms", "eddy2d-conductor"):
        for name in ("certificate.json", "trajectory.csv", "energy.json"):
            assert (tmp_path / recipe / name).exists()

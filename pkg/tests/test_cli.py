import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from qmem.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, compare_rows, fmt, main
from qmem.config import parse_config


def write(tmp_path, name="cfg.json", **fields):
    data = {"preset": "single-qubit-demo"}
    data.update(fields)
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_format_round_trips(rng):
    for x in rng.normal(size=100) * 10.0 ** rng.integers(-20, 20, size=100):
        assert float(fmt(x)) == x
    assert fmt(0.1) == "0.10000000000000001"


def test_usage_errors(tmp_path, capsys):
    for argv in ([], ["bogus", "x.json"], ["simulate"], ["simulate", "x.json", "--dt", "-1"]):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == EXIT_USAGE


def test_validate_passes_for_isolated_qubit(tmp_path, capsys):
    cfg = write(tmp_path, M=[[0, 0, 0], [0, 0, 0]])
    assert main(["validate", cfg]) == EXIT_OK
    out = capsys.readouterr().out
    for name in ("ccr", "closure", "state-admissibility", "selection-rank", "g-at-z0", "oracle-drift", "oracle-diffusion"):
        assert name in out
    assert "FAIL" not in out


def test_validate_names_failed_checks(tmp_path, capsys):
    cfg = write(tmp_path, initial_state={"mu0": [0, 0, 1.5]})
    assert main(["validate", cfg]) == EXIT_VALIDATION
    assert "state-admissibility" in capsys.readouterr().err
    cfg = write(tmp_path, F=[[1, 0, 0], [2, 0, 0]])
    assert main(["validate", cfg]) == EXIT_VALIDATION
    assert "selection-rank" in capsys.readouterr().err
    cfg = write(tmp_path, initial_state={"rho0": [[1.2, 0], [0, -0.2]]})
    assert main(["validate", cfg]) == EXIT_VALIDATION
    assert "state-admissibility" in capsys.readouterr().err


def test_malformed_config_reports_path(tmp_path, capsys):
    cfg = write(tmp_path, K=[[1, 0], [0, 1]])
    assert main(["validate", cfg]) == EXIT_VALIDATION
    assert "K:" in capsys.readouterr().err


def test_simulate_isolated_zero_control(tmp_path):
    cfg = write(tmp_path, M=[[0, 0, 0], [0, 0, 0]], E_star=[0, 0, 0], step=0.01)
    assert main(["simulate", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    rows = read_csv(tmp_path / "o" / "trajectory.csv")
    assert list(rows[0]) == ["t", "Delta", "penalty", "Phi", "U_1", "U_2", "U_3"]
    assert len(rows) == 101
    assert max(abs(float(r["Delta"])) for r in rows) <= 1e-12


def test_simulate_with_state_columns(tmp_path):
    cfg = write(tmp_path, step=0.05)
    assert main(["simulate", cfg, "--out", str(tmp_path), "--with-z"]) == EXIT_OK
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[0].split(",")
    assert header[7:10] == ["z_1_0", "z_1_1", "z_1_2"] and len(header) == 7 + 12


def test_sampled_zero_file_matches_zero_control(tmp_path):
    samples = tmp_path / "u.csv"
    samples.write_text("t,U_1,U_2,U_3\n0,0,0,0\n0.5,0,0,0\n1,0,0,0\n")
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["simulate", write(tmp_path, step=0.005), "--out", str(a)]) == EXIT_OK
    cfg = write(tmp_path, "file.json", step=0.005, control="file:u.csv")
    assert main(["simulate", cfg, "--out", str(b)]) == EXIT_OK
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()


def test_simulate_blow_up_writes_partial_file(tmp_path, capsys):
    samples = tmp_path / "u.csv"
    samples.write_text("t,U_1,U_2,U_3\n0,1e6,1e6,1e6\n1,1e6,1e6,1e6\n")
    cfg = write(tmp_path, step=0.01, control="file:u.csv")
    with np.errstate(all="ignore"):
        code = main(["simulate", cfg, "--out", str(tmp_path / "o")])
    assert code == EXIT_NUMERIC
    err = capsys.readouterr().err
    assert "blew up" in err and "partial" in err
    rows = read_csv(tmp_path / "o" / "trajectory.csv")
    assert 1 <= len(rows) < 101


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["simulate", write(tmp_path, step=0.05), "--out", str(blocker / "sub")]) == EXIT_VALIDATION
    assert "output" in capsys.readouterr().err


def test_bad_control_file(tmp_path):
    (tmp_path / "u.csv").write_text("t,U_1\n0,1\n1,1\n")
    assert main(["simulate", write(tmp_path, control="file:u.csv"), "--out", str(tmp_path)]) == EXIT_VALIDATION
    (tmp_path / "short.csv").write_text("0,0,0,0\n0.5,0,0,0\n")
    assert main(["simulate", write(tmp_path, control="file:short.csv"), "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_pointwise_simulation_matches_compare_row(tmp_path):
    cfg_path = write(tmp_path, step=0.005, control="pointwise")
    assert main(["simulate", cfg_path, "--out", str(tmp_path)]) == EXIT_OK
    final = read_csv(tmp_path / "trajectory.csv")[-1]
    rows, _, _ = compare_rows(parse_config(json.loads(open(cfg_path).read())))
    pointwise = next(r for r in rows if r[0] == "pointwise")
    assert float(final["Phi"]) == pointwise[3]


def test_compare_accounting_rows(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["compare", write(tmp_path, step=0.005), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "compare.csv")
    assert [r["name"] for r in rows] == ["zero", "pointwise", "hjb1", "psi0", "psi0+eps*psi1"]
    for r in rows[:3]:
        assert abs(float(r["Phi"]) - float(r["Delta"]) - float(r["penalty"])) <= 1e-10
    assert "pointwise" in capsys.readouterr().out


def test_compare_without_authority(tmp_path):
    cfg = write(tmp_path, K=[[0], [0], [0]], penalty={"Gamma": [[1]], "epsilon": 0.05}, step=0.005)
    out = tmp_path / "o"
    assert main(["compare", cfg, "--out", str(out)]) == EXIT_OK
    rows = {r["name"]: float(r["Phi"]) for r in read_csv(out / "compare.csv")}
    for name in ("zero", "pointwise", "hjb1"):
        assert abs(rows[name] - rows["psi0"]) <= 1e-6


def test_compare_requires_scaled_penalty(tmp_path, capsys):
    cfg = write(tmp_path, penalty={"Pi": np.eye(3).tolist()})
    assert main(["compare", cfg, "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert "penalty" in capsys.readouterr().err


def test_compare_sweep(tmp_path):
    out = tmp_path / "o"
    assert main(["compare", write(tmp_path, step=0.005), "--out", str(out), "--sweep", "0.02", "0.01"]) == EXIT_OK
    rows = read_csv(out / "eps_sweep.csv")
    assert [float(r["eps"]) for r in rows] == [0.02, 0.01]
    assert rows[0]["defect_ratio"] == "nan"
    assert float(rows[1]["defect_ratio"]) > 2.0


def test_hjb_command(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["hjb", write(tmp_path, step=0.002), "--out", str(out)]) == EXIT_OK
    summary = {r["quantity"]: float(r["value"]) for r in read_csv(out / "hjb_summary.csv")}
    assert summary["psi0"] == pytest.approx(5.965591232275887, rel=1e-9)
    assert summary["psi1"] == pytest.approx(-11.25090610260208, rel=1e-6)
    ratios = [float(r["ratio"]) for r in read_csv(out / "hjb_residuals.csv")[1:]]
    assert all(3.5 <= q <= 4.5 for q in ratios)
    assert len(read_csv(out / "pontryagin.csv")) == 3


def test_hjb_without_authority(tmp_path):
    cfg = write(tmp_path, K=[[0], [0], [0]], penalty={"Gamma": [[1]], "epsilon": 0.05}, step=0.005)
    out = tmp_path / "o"
    assert main(["hjb", cfg, "--out", str(out)]) == EXIT_OK
    assert all(float(r["residual"]) <= 1e-8 for r in read_csv(out / "hjb_residuals.csv"))
    assert all(float(r["drift"]) <= 1e-8 for r in read_csv(out / "pontryagin.csv"))


@pytest.mark.parametrize("control", ["zero", "pointwise"])
def test_oracle_command(tmp_path, capsys, control):
    cfg = write(tmp_path, control=control, step=0.005, output=str(tmp_path / "o"))
    assert main(["oracle", cfg]) == EXIT_OK
    out = capsys.readouterr().out
    for name in ("drift", "diffusion", "mean-path", "two-point"):
        assert name in out
    assert len(read_csv(tmp_path / "o" / "oracle.csv")) == 4


def test_two_qubit_validate_and_oracle(tmp_path, rng):
    from qmem.scenarios import random_spec

    spec = random_spec(rng, qubits=2, controls=2)
    data = {
        "qubits": 2,
        "E_star": spec.E_star.tolist(),
        "K": spec.K.tolist(),
        "M": spec.M.tolist(),
        "N": spec.N.tolist(),
        "F": spec.F.tolist(),
        "initial_state": {"rho0": {"re": spec.rho0.real.tolist(), "im": spec.rho0.imag.tolist()}},
        "horizon": 1.0,
        "step": 0.005,
        "control": "zero",
    }
    path = tmp_path / "q2.json"
    path.write_text(json.dumps(data))
    assert main(["validate", str(path)]) == EXIT_OK
    assert main(["oracle", str(path)]) == EXIT_OK


def test_console_script_and_logging(tmp_path):
    cfg = write(tmp_path, step=0.05)
    proc = subprocess.run(
        [sys.executable, "-m", "qmem.cli", "simulate", cfg, "--out", str(tmp_path)],
        capture_output=True,
        text=True,
        env={"QMEM_LOG": "INFO", "PATH": ""},
    )
    assert proc.returncode == EXIT_OK
    assert "INFO qmem: loaded" in proc.stderr

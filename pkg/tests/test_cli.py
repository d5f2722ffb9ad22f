import csv
import json
import os
import subprocess
import sys

import pytest

from rydgate.cli import EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, main, parse_quantity, UsageError


def test_parse_quantity():
    assert parse_quantity("20uK")[0] == pytest.approx(2e-5)
    assert parse_quantity("5.5MHz", "frequency")[0] == pytest.approx(2 * 3.141592653589793 * 5.5e6)
    assert parse_quantity("3") == (3.0, None)
    with pytest.raises(UsageError):
        parse_quantity("3 parsecs")
    with pytest.raises(UsageError):
        parse_quantity("20uK", "time")


def test_usage_errors(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["nonsense"]) == EXIT_USAGE
    assert main(["optimize", "--spec", "NOPE", "--tau", "8"]) == EXIT_USAGE
    assert main(["simulate", "missing.json"]) == EXIT_USAGE
    assert main(["sweep", "TO", "--sigma-grid", "", "--T-grid", "0"]) == EXIT_USAGE
    assert main(["verify", "bogus"]) == EXIT_USAGE


def test_malformed_pulse(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", str(bad)]) == EXIT_USAGE


def test_optimize_writes_pulse_and_manifest(tmp_path):
    out = tmp_path / "to.json"
    res = tmp_path / "res.json"
    code = main(["optimize", "--spec", "TO", "--tau", "8", "-N", "60", "--restarts", "3",
                 "--seed", "2", "--out", str(out), "--result", str(res)])
    assert code == EXIT_OK
    r = json.loads(res.read_text())
    assert r["success"] and r["J"] < 1e-8
    man = json.loads((tmp_path / "to.json.manifest.json").read_text())
    assert man["config"]["seed"] == 2 and man["version"]
    # replaying the manifest reproduces the pulse bit for bit
    first = out.read_text()
    out.unlink()
    assert main(["--replay", str(tmp_path / "to.json.manifest.json")]) == EXIT_OK
    assert out.read_text() == first


def test_optimize_infeasible_exit_code(tmp_path):
    code = main(["optimize", "--spec", "TO", "--tau", "4", "-N", "40", "--restarts", "1",
                 "--result", str(tmp_path / "r.json")])
    assert code == EXIT_INFEASIBLE


def test_simulate_csv_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["simulate", "TO", "--sigma-eps", "0.01", "--T", "5uK", "--sampler", "mc",
            "--shots", "200", "--seed", "3"]
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(a.open()))
    assert rows[0]["pulse_label"] == "TO" and float(rows[0]["F"]) < 1


def test_eps_scan(tmp_path):
    out = tmp_path / "scan.csv"
    assert main(["simulate", "AR", "--eps-scan", "-0.03:0.03:5", "--no-decay", "--no-stark",
                 "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 5 and max(float(r["infidelity"]) for r in rows) < 1e-4


def test_light_shift_selects_stark_robust_variant(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    common = ["--sigma-eps", "0.02", "--zeta", "0.1"]
    assert main(["simulate", "AR", "--out", str(a)] + common) == EXIT_OK
    assert main(["simulate", "SSR1_0.1", "--out", str(b)] + common) == EXIT_OK
    ra, rb = next(csv.DictReader(a.open())), next(csv.DictReader(b.open()))
    assert ra["pulse_label"] == "AR" and ra["F"] == rb["F"]


def test_sweep(tmp_path):
    out = tmp_path / "sw.csv"
    assert main(["sweep", "TO", "AR", "--sigma-grid", "0,0.03", "--T-grid", "0",
                 "--out", str(out)]) == EXIT_OK
    amap = json.loads((tmp_path / "sw.csv.argmin.json").read_text())
    assert amap["best"] == [["TO"], ["AR"]]


def test_trap_freq(capsys):
    assert main(["trap-freq", "--V0", "1e-27", "--mass", "171"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["nu_over_sqrt_2V0_m"] == pytest.approx(4.0791, rel=1e-4)
    assert main(["trap-freq", "--V0", "1e-27", "--dn", "1"]) == EXIT_INFEASIBLE


def test_logical(capsys):
    assert main(["logical", "--d", "3", "--pe", "0.05", "--pp", "0.01", "--shots", "2000"]) \
        == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert 0 < out["p_L"] < 0.1
    assert main(["logical", "--d", "4", "--pe", "0.05", "--pp", "0.01"]) == EXIT_USAGE


def test_verify_suite(capsys):
    assert main(["verify", "decoder"]) == EXIT_OK
    assert "PASS" in capsys.readouterr().out


def test_console_script_threads_env(tmp_path):
    env = dict(os.environ, RYD_THREADS="1")
    r = subprocess.run([sys.executable, "-m", "rydgate.cli", "trap-freq", "--V0", "1e-27"],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 0 and "nu" in r.stdout

from __future__ import annotations

import json
import os
import subprocess
import sys

import pytest

from cvqdc.cli import RunConfig, UsageError, main, resolve_seed

SMOKE = {"omega": 2.57, "c": 0.5, "r": 5e-7, "n": 1, "sigma2": 0, "trials": 4000, "seed": 11, "max_runs": 10_000}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def smoke_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(SMOKE))
    return path


# --- analytic subcommands -------------------------------------------------------


def test_epsilon(capsys):
    assert run(capsys, "epsilon", "--omega", "2.57") == (0, "0.0101699\n", "")
    assert run(capsys, "epsilon", "--omega", "1", "--delta", "1")[1] == "0.314611\n"
    assert run(capsys, "epsilon", "--omega", "1", "--digits", "3")[1] == "0.315\n"


def test_epsilon_rejects_bad_omega(capsys):
    code, out, err = run(capsys, "epsilon", "--omega", "-1")
    assert code == 2 and out == "" and "omega" in err


def test_pn(capsys):
    assert float(run(capsys, "pn", "--n", "3", "--p", "0.1")[1]) == pytest.approx(0.028, rel=1e-14)
    assert float(run(capsys, "pn", "--n", "35", "--target", "0.01")[1]) == pytest.approx(0.312, abs=1e-3)
    code, out, _ = run(capsys, "pn", "--n", "7", "--sweep", "--step", "0.25")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "n,p,Pn" and len(lines) == 6
    n, p, pn = lines[3].split(",")
    assert (n, p) == ("7", "0.5") and float(pn) == pytest.approx(0.5, abs=1e-12)


def test_pn_errors(capsys):
    assert run(capsys, "pn", "--n", "4", "--p", "0.1")[0] == 2
    assert run(capsys, "pn", "--n", "3")[0] == 2
    assert run(capsys, "pn", "--n", "3", "--p", "1.5")[0] == 2


def test_survival_and_maxlen(capsys):
    assert float(run(capsys, "survival", "--M", "1", "--sigma2", "1")[1]) == pytest.approx(0.9992928932188134)
    assert float(run(capsys, "survival", "--M", "10", "--sigma2", "0", "--r", "0.05")[1]) == pytest.approx(0.95)
    assert float(run(capsys, "maxlen")[1]) == pytest.approx(115942.0289855, rel=1e-9)
    assert float(run(capsys, "maxlen", "--preset", "coded")[1]) == pytest.approx(228571.4285714, rel=1e-9)


def test_curve_to_file(capsys, tmp_path):
    out_csv = tmp_path / "curve.csv"
    code, out, _ = run(capsys, "curve", "--preset", "coded", "--sigma2", "0.1,0.3", "--decades", "4", "--per-decade", "5", "--out", str(out_csv))
    assert code == 0
    assert out.startswith("best sigma2=0.30")
    rows = out_csv.read_text().splitlines()
    assert rows[0] == "sigma2,N,I_bits,P"
    assert len(rows) == 1 + 2 * 21


def test_curve_to_stdout_keeps_csv_clean(capsys):
    code, out, err = run(capsys, "curve", "--sigma2", "0.05", "--decades", "2", "--per-decade", "2")
    assert code == 0
    assert out.splitlines()[0] == "sigma2,N,I_bits,P"
    assert err.startswith("best sigma2=")


def test_curve_unwritable_output_is_an_io_error(capsys, tmp_path):
    code, _, err = run(capsys, "curve", "--sigma2", "0.05", "--decades", "1", "--per-decade", "1", "--out", str(tmp_path / "nope" / "c.csv"))
    assert code == 3 and "nope" in err


def test_ber(capsys):
    code, out, _ = run(capsys, "ber", "--sigma2", "0,0.05", "--trials", "4000", "--seed", "3")
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("channel,sigma2,bob_ber")
    assert lines[1].startswith("identity,0,") and lines[2].startswith("ugqcm,0.05,")


def test_figures(capsys, tmp_path):
    code, out, _ = run(capsys, "figures", "--out-dir", str(tmp_path))
    assert code == 0
    assert {p.name for p in tmp_path.iterdir()} == {"fig4a.csv", "fig4b.csv", "fig4_cutoffs.csv", "fig5.csv"}


# --- run configs and seeds -------------------------------------------------------


def test_run_config_round_trip():
    cfg = RunConfig.from_mapping(SMOKE)
    assert RunConfig.from_mapping(json.loads(cfg.dumps())) == cfg
    assert cfg.protocol().c == 0.5


def test_run_config_validation():
    for bad in ({"bogus": 1}, {"trials": 999}, {"trials": 1001}, {"c": 1.0}, {"sigma2": -1}, {"n": 2}, {"omega": "x"}, {"seed": 1.5}):
        with pytest.raises(UsageError):
            RunConfig.from_mapping(bad)
    with pytest.raises(UsageError):
        RunConfig.from_mapping([1, 2])


def test_seed_precedence(monkeypatch):
    monkeypatch.setenv("CVQDC_SEED", "42")
    assert resolve_seed(7, 9) == 7
    assert resolve_seed(None, 9) == 9
    assert resolve_seed(None, None) == 42
    monkeypatch.delenv("CVQDC_SEED")
    assert resolve_seed(None, None) == 0
    monkeypatch.setenv("CVQDC_SEED", "abc")
    with pytest.raises(UsageError):
        resolve_seed(None, None)


# --- simulate ---------------------------------------------------------------------


def test_simulate_document(capsys, smoke_config, tmp_path):
    out = tmp_path / "r.json"
    trans = tmp_path / "t.jsonl"
    assert run(capsys, "simulate", str(smoke_config), "--out", str(out), "--transcript", str(trans))[0] == 0
    doc = json.loads(out.read_text())
    assert set(doc) == {"config", "channel", "session", "aborted", "ber", "analytic", "transcript"}
    assert doc["channel"] == "identity" and doc["config"]["seed"] == 11
    assert doc["session"]["message_bits_sent"] == 4000
    assert doc["ber"]["bob"]["trials"] == 4000
    assert doc["analytic"]["bob_bit_error"] == pytest.approx(0.0101698515)
    assert trans.read_text().count("\n") > 4 * 2000


def test_simulate_under_attack_reports_detection(capsys, tmp_path):
    path = tmp_path / "atk.json"
    path.write_text(json.dumps({"sigma2": 1.0, "trials": 2000, "seed": 5}))
    code, out, _ = run(capsys, "simulate", str(path))
    doc = json.loads(out)
    assert code == 0 and doc["aborted"] is True
    assert doc["analytic"]["detection_at_1pct"]["M"] == 101


def test_simulate_is_byte_deterministic(capsys, smoke_config, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "simulate", str(smoke_config), "--out", str(a))
    run(capsys, "simulate", str(smoke_config), "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_simulate_seed_flag_and_environment(capsys, tmp_path, monkeypatch):
    path = tmp_path / "noseed.json"
    path.write_text(json.dumps({k: v for k, v in SMOKE.items() if k != "seed"}))
    monkeypatch.setenv("CVQDC_SEED", "77")
    from_env = json.loads(run(capsys, "simulate", str(path))[1])
    from_flag = json.loads(run(capsys, "simulate", str(path), "--seed", "77")[1])
    other = json.loads(run(capsys, "simulate", str(path), "--seed", "78")[1])
    assert from_env == from_flag
    assert from_env["config"]["seed"] == 77
    assert other["session"] != from_env["session"]


def test_simulate_errors(capsys, tmp_path, smoke_config):
    assert run(capsys, "simulate", str(tmp_path / "missing.json"))[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "simulate", str(bad))[0] == 2
    bad.write_text(json.dumps({"sigma": 1}))
    code, _, err = run(capsys, "simulate", str(bad))
    assert code == 2 and "sigma" in err
    code, _, _ = run(capsys, "simulate", str(smoke_config), "--out", str(tmp_path / "no" / "r.json"))
    assert code == 3


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    res = subprocess.run([sys.executable, "-m", "cvqdc", "epsilon", "--omega", "2.57"], capture_output=True, text=True, env=env)
    assert res.returncode == 0 and res.stdout == "0.0101699\n"
    res = subprocess.run([sys.executable, "-m", "cvqdc", "pn", "--n", "4", "--p", "0.1"], capture_output=True, text=True, env=env)
    assert res.returncode == 2 and "error" in res.stderr

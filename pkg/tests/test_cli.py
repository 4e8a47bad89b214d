"""Command-line surface: JSON shapes, exit codes, byte-level determinism."""

import json
import math
import shutil
import subprocess
import sys

import pytest

from rwre import cli, jsonfmt


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _env(data_dir, name):
    return str(data_dir / name)


# -- classify -----------------------------------------------------------------

def test_classify_half(capsys, data_dir):
    code, out, err = _run(capsys, "classify", "--env",
                          _env(data_dir, "env_binary_half.json"))
    assert code == 0
    d = json.loads(out)
    assert d["regime"] == "NULL_REC_SUBDIFFUSIVE"
    assert d["kappa"] == "inf"
    assert d["gamma_tilde"] == pytest.approx(math.log(2.0), abs=1e-12)
    assert d["predicted"]["rtilde_limit"] == pytest.approx(1 / math.log(2.0),
                                                           abs=1e-12)
    # parse-reserialize identity at 17 significant digits
    assert jsonfmt.dumps(d) == out.strip()


def test_classify_transient(capsys, data_dir):
    code, out, _ = _run(capsys, "classify", "--env",
                        _env(data_dir, "env_binary_07.json"))
    assert code == 0
    d = json.loads(out)
    assert d["regime"] == "TRANSIENT"
    assert d["kappa"] is None
    assert d["gamma_tilde"] is None
    assert d["predicted"] is None


def test_classify_missing_env_flag(capsys):
    code, _, err = _run(capsys, "classify")
    assert code == 2
    assert "usage" in err.lower()


def test_classify_unreadable_file(capsys, tmp_path):
    code, _, err = _run(capsys, "classify", "--env",
                        str(tmp_path / "none.json"))
    assert code == 2
    assert "error:" in err


def test_unknown_command(capsys):
    code, _, err = _run(capsys, "frobnicate")
    assert code == 2


# -- simulate -------------------------------------------------------------------

def test_simulate_writes_outputs(capsys, data_dir, tmp_path):
    out_dir = tmp_path / "run1"
    code, out, _ = _run(capsys, "simulate",
                        "--env", _env(data_dir, "env_binary_half.json"),
                        "--stop", "steps:64", "--grid", "dyadic:4:6",
                        "--replicas", "3", "--seed", "9",
                        "--out", str(out_dir))
    assert code == 0
    d = json.loads(out)
    assert d["rows"] == 9
    assert d["records"] == 9
    for name in ("raw.jsonl", "summary.csv", "runmeta.json", "plot_r.dat"):
        assert (out_dir / name).exists(), name


def test_simulate_thread_count_invisible_in_output(capsys, data_dir,
                                                   tmp_path):
    args = ["simulate", "--env", _env(data_dir, "env_updrift_mix.json"),
            "--stop", "steps:256", "--grid", "dyadic:6:8",
            "--replicas", "5", "--seed", "31"]
    d1, d2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(args + ["--out", str(d1), "--threads", "1"]) == 0
    assert cli.main(args + ["--out", str(d2), "--threads", "3"]) == 0
    capsys.readouterr()
    for name in ("raw.jsonl", "summary.csv", "runmeta.json"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name


def test_simulate_stop_must_close_the_grid(capsys, data_dir, tmp_path):
    code, _, err = _run(capsys, "simulate",
                        "--env", _env(data_dir, "env_binary_half.json"),
                        "--stop", "steps:100", "--grid", "dyadic:4:6",
                        "--replicas", "2", "--seed", "1",
                        "--out", str(tmp_path / "x"))
    assert code == 2
    assert "largest grid point" in err


def test_simulate_bad_stop(capsys, data_dir, tmp_path):
    code, _, err = _run(capsys, "simulate",
                        "--env", _env(data_dir, "env_binary_half.json"),
                        "--stop", "steps:many", "--replicas", "2",
                        "--seed", "1", "--out", str(tmp_path / "x"))
    assert code == 2


def test_simulate_bad_grid_text(capsys, data_dir, tmp_path):
    code, _, err = _run(capsys, "simulate",
                        "--env", _env(data_dir, "env_binary_half.json"),
                        "--stop", "steps:64", "--grid", "linear:4:6",
                        "--replicas", "2", "--seed", "1",
                        "--out", str(tmp_path / "x"))
    assert code == 2
    assert "dyadic" in err


# -- exact ------------------------------------------------------------------------

def test_exact_closed_form_binary(capsys, data_dir):
    code, out, _ = _run(capsys, "exact",
                        "--env", _env(data_dir, "env_binary_half.json"),
                        "--depth", "7", "--m", "3", "--seed", "1",
                        "--oracle")
    assert code == 0
    d = json.loads(out)
    assert d["m"] == 3
    assert d["rho"] == pytest.approx(1.0 / 6.0, abs=1e-13)
    assert d["expected_hit_time_paper"] == pytest.approx(6.0, rel=1e-12)
    assert d["expected_hit_time_oracle"] == pytest.approx(15.0, rel=1e-9)
    assert d["max_abs_beta_error"] <= 1e-11


def test_exact_without_oracle(capsys, data_dir):
    code, out, _ = _run(capsys, "exact",
                        "--env", _env(data_dir, "env_sparse_mix.json"),
                        "--depth", "6", "--m", "4", "--seed", "2")
    assert code == 0
    d = json.loads(out)
    assert d["expected_hit_time_oracle"] is None
    assert d["max_abs_beta_error"] is None
    assert d["gamma_root"] >= 0.0


def test_exact_m_out_of_range(capsys, data_dir):
    code, _, err = _run(capsys, "exact",
                        "--env", _env(data_dir, "env_binary_half.json"),
                        "--depth", "4", "--m", "9", "--seed", "1")
    assert code == 2
    assert "1 <= m <= depth" in err


def test_exact_vertex_budget_exit_code(capsys, data_dir):
    code, _, err = _run(capsys, "exact",
                        "--env", _env(data_dir, "env_binary_half.json"),
                        "--depth", "25", "--m", "3", "--seed", "1",
                        "--max-vertices", "5000")
    assert code == 3
    assert "error:" in err


# -- verify -----------------------------------------------------------------------

def test_verify_biggins_exact_z_zero(capsys, data_dir):
    code, out, _ = _run(capsys, "verify",
                        "--env", _env(data_dir, "env_binary_half.json"),
                        "--suite", "biggins", "--n", "4",
                        "--replicas", "100", "--seed", "3")
    assert code == 0
    d = json.loads(out)
    assert d["suite"] == "biggins"
    assert d["z"] == 0.0
    assert d["lhs"] == 1.0 and d["rhs"] == 1.0


def test_verify_biggins_numeric_threshold(capsys, data_dir):
    code, out, _ = _run(capsys, "verify",
                        "--env", _env(data_dir, "env_updrift_mix.json"),
                        "--suite", "biggins", "--n", "5", "--c", "0.25",
                        "--replicas", "400", "--seed", "17")
    assert code == 0
    d = json.loads(out)
    assert 0.0 < d["rhs"] < 1.0
    assert abs(d["z"]) <= 5.0


def test_verify_biggins_bad_c(capsys, data_dir):
    code, _, err = _run(capsys, "verify",
                        "--env", _env(data_dir, "env_updrift_mix.json"),
                        "--suite", "biggins", "--c", "soon",
                        "--replicas", "10", "--seed", "1")
    assert code == 2


def test_verify_martingale_w(capsys, data_dir):
    code, out, _ = _run(capsys, "verify",
                        "--env", _env(data_dir, "env_binary_half.json"),
                        "--suite", "martingale", "--which", "W", "--n", "5",
                        "--replicas", "50", "--seed", "2")
    assert code == 0
    d = json.loads(out)
    assert d["lhs"] == 1.0 and d["z"] == 0.0  # degenerate offspring


def test_verify_martingale_m(capsys, data_dir):
    code, out, _ = _run(capsys, "verify",
                        "--env", _env(data_dir, "env_updrift_mix.json"),
                        "--suite", "martingale", "--which", "M", "--n", "6",
                        "--replicas", "2000", "--seed", "8")
    assert code == 0
    d = json.loads(out)
    assert abs(d["z"]) <= 4.0


def test_verify_maxpot_lines(capsys, data_dir):
    code, out, _ = _run(capsys, "verify",
                        "--env", _env(data_dir, "env_updrift_mix.json"),
                        "--suite", "maxpot", "--levels", "4,6",
                        "--replicas", "120", "--seed", "5")
    assert code == 0
    lines = [json.loads(l) for l in out.strip().splitlines()]
    assert [d["n"] for d in lines] == [4, 6]
    for d in lines:
        assert d["surviving"] == 120
        assert d["vbar_max"] <= math.log(3.0) + 1e-12


def test_verify_maxpot_bad_levels(capsys, data_dir):
    code, _, err = _run(capsys, "verify",
                        "--env", _env(data_dir, "env_updrift_mix.json"),
                        "--suite", "maxpot", "--levels", "4,x",
                        "--replicas", "10", "--seed", "5")
    assert code == 2


# -- sweep --------------------------------------------------------------------------

def test_sweep_directory(capsys, data_dir, tmp_path):
    d = tmp_path / "envs"
    d.mkdir()
    for name in ("env_binary_half.json", "env_binary_07.json"):
        shutil.copy(data_dir / name, d / name)
    code, out, _ = _run(capsys, "sweep", "--env-dir", str(d))
    assert code == 0
    lines = [json.loads(l) for l in out.strip().splitlines()]
    assert [l["env"] for l in lines] == ["env_binary_07.json",
                                         "env_binary_half.json"]
    assert lines[0]["report"]["regime"] == "TRANSIENT"
    assert lines[1]["report"]["regime"] == "NULL_REC_SUBDIFFUSIVE"


def test_sweep_rejects_missing_dir(capsys, tmp_path):
    code, _, err = _run(capsys, "sweep", "--env-dir",
                        str(tmp_path / "void"))
    assert code == 2


def test_sweep_rejects_empty_dir(capsys, tmp_path):
    d = tmp_path / "empty"
    d.mkdir()
    code, _, err = _run(capsys, "sweep", "--env-dir", str(d))
    assert code == 2


# -- end to end through a real process ----------------------------------------------

def test_console_entry_point(data_dir):
    proc = subprocess.run(
        [sys.executable, "-m", "rwre.cli", "classify", "--env",
         _env(data_dir, "env_critical.json")],
        capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    d = json.loads(proc.stdout)
    assert d["regime"] == "NULL_REC_CRITICAL"

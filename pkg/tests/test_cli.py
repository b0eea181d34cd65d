import json
import subprocess
import sys

import numpy as np
import pytest

from skyrmebench import cli


def run(*argv):
    return cli.main(list(argv))


def write_cfg(path, text):
    path.write_text(text)
    return str(path)


def test_profile_outputs(tmp_path, capsys):
    assert run("profile", "--out", str(tmp_path), "--samples", "20") == 0
    lines = (tmp_path / "profile.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash: ")
    assert lines[1] == "rho,U,U1,U2,V1,V2,V_tilde"
    assert len(lines) == 2 + 21
    man = json.loads((tmp_path / "manifest_profile.json").read_text())
    assert man["status"] == "ok" and "profile.csv" in man["outputs"]
    assert man["config_hash"] == lines[0].split()[-1]


def test_artifacts_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("certify", "--out", str(d), "--n-min", "20") == 0
    assert (a / "certificate.json").read_bytes() == (b / "certificate.json").read_bytes()


def test_potentials_and_certify(tmp_path):
    assert run("potentials", "--out", str(tmp_path)) == 0
    audit = json.loads((tmp_path / "identity_audit.json").read_text())
    assert "config_hash" in audit
    assert run("certify", "--out", str(tmp_path), "--n-min", "0") == 1


def test_modes_single_and_scan(tmp_path):
    assert run("modes", "--out", str(tmp_path), "--lam", "2") == 0
    assert json.loads((tmp_path / "mode.json").read_text())["verdict"] == "RATIO_LIMIT_ONE"
    assert run("modes", "--out", str(tmp_path), "--lam", "not-a-number") == 2


def test_evolve_and_extract(tmp_path):
    cfg = write_cfg(tmp_path / "run.ini", "[run]\nN = 16\ntau_end = 1.0\n\n"
                    "[perturbation]\nkind = bump\namplitude = 1e-3\nwidth = 0.3\n")
    out = tmp_path / "ev"
    assert run("evolve", "--out", str(out), "--config", cfg) == 0
    ts = np.loadtxt(out / "timeseries.csv", delimiter=",", skiprows=2)
    assert ts[0, 0] == 0 and ts[-1, 0] == pytest.approx(1.0)
    cfg = write_cfg(tmp_path / "x.ini", "[run]\nN = 16\ntau_end = 2.0\n\n[perturbation]\nkind = zero\n\n"
                    "[extract]\nT_lo = 0.99\nT_hi = 1.01\ntau_probe = 2.0\nxtol = 1e-9\n")
    assert run("extract-T", "--out", str(out), "--config", cfg) == 0
    res = json.loads((out / "blowup_time.json").read_text())
    assert res["status"] == "ok" and abs(res["T_extracted"] - 1) < 1e-8


def test_extract_failure_is_a_finding(tmp_path):
    cfg = write_cfg(tmp_path / "x.ini", "[run]\nN = 16\n\n[extract]\nT_lo = 1.001\nT_hi = 1.01\ntau_probe = 2.0\n")
    assert run("extract-T", "--out", str(tmp_path), "--config", cfg) == 1
    assert json.loads((tmp_path / "blowup_time.json").read_text())["status"] == "extraction failure"


@pytest.mark.parametrize("text", ["[run]\nN = many\n", "[bogus]\nx = 1\n", "[run]\nspeed = 2\n",
                                  "[run]\nT = 1.7\n", "[perturbation]\nkind = wiggle\n"])
def test_bad_config_exits_2(tmp_path, text):
    cfg = write_cfg(tmp_path / "bad.ini", text)
    assert run("evolve", "--out", str(tmp_path), "--config", cfg) == 2


def test_missing_config_and_bad_cfl(tmp_path):
    assert run("evolve", "--out", str(tmp_path)) == 2
    cfg = write_cfg(tmp_path / "c.ini", "[run]\nN = 16\ndt = 0.5\n")
    assert run("evolve", "--out", str(tmp_path), "--config", cfg) == 2


def test_usage_errors_exit_2():
    for argv in (["nonsense"], ["profile", "--no-such-flag"], []):
        with pytest.raises(SystemExit) as exc:
            run(*argv)
        assert exc.value.code == 2


def test_out_dir_precedence(tmp_path, monkeypatch):
    env = tmp_path / "env"
    monkeypatch.setenv("WORKBENCH_OUT", str(env))
    assert run("profile", "--samples", "5") == 0
    assert (env / "profile.csv").exists()
    flag = tmp_path / "flag"
    assert run("profile", "--samples", "5", "--out", str(flag)) == 0
    assert (flag / "profile.csv").exists()


def test_verify_all_subset(tmp_path):
    assert run("verify-all", "--out", str(tmp_path), "--only", "1", "2", "3") == 0
    rep = json.loads((tmp_path / "acceptance.json").read_text())
    assert rep["passed"] == 3 and [c["number"] for c in rep["criteria"]] == [1, 2, 3]
    assert "elapsed" not in json.dumps(rep)


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "skyrmebench", "profile", "--samples", "5",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert p.returncode == 0 and "U(rho*)" in p.stdout

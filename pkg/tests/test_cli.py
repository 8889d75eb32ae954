import json
import subprocess
import sys

import numpy as np
import pytest

from detcouple import cli
from detcouple.errors import ValidationError


def run_main(argv):
    return cli.main(argv)


def test_parse_simulate_flags():
    cmd, cfg = cli.parse_config(
        "simulate --space sphere --dim 2 --profile constant --rho0 1.5707963 "
        "--dt 1e-4 --T 1 --paths 100 --seed 42".split())
    assert cmd == "simulate"
    assert cfg.space == "sphere" and cfg.dim == 2 and cfg.K == 1.0
    assert cfg.rho0 == pytest.approx(1.5707963)
    assert cfg.dt == 1e-4 and cfg.T == 1.0 and cfg.paths == 100 and cfg.seed == 42
    assert not cfg.enforce_distance


def test_parse_rejects_bad_dim():
    with pytest.raises(ValidationError, match="dim"):
        cli.parse_config("simulate --space sphere --dim 0 --profile constant --rho0 1".split())
    assert run_main("simulate --space sphere --dim 0 --profile constant --rho0 1".split()) == 2


def test_parse_rejects_unknown_profile():
    with pytest.raises(ValidationError, match="profile"):
        cli.parse_config("simulate --profile warp --rho0 1".split())


def test_config_file_and_flag_precedence(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text(
        "# demo configuration\n"
        "space = sphere\n"
        "dim = 2\n"
        "profile = constant\n"
        "rho0 = 1.0\n"
        "dt = 1e-2\n"
        "T = 0.5\n")
    cmd, cfg = cli.parse_config(["simulate", "--config", str(cfgfile), "--dt", "1e-3"])
    assert cfg.dt == 1e-3        # flag wins
    assert cfg.T == 0.5          # file value kept
    assert cfg.rho0 == 1.0


def test_config_file_unknown_key(tmp_path):
    cfgfile = tmp_path / "bad.cfg"
    cfgfile.write_text("spaces = sphere\n")
    with pytest.raises(ValidationError, match="unknown key"):
        cli.parse_config(["check", "--config", str(cfgfile)])


def test_rho0_deg_conversion():
    _, cfg = cli.parse_config(
        "simulate --space sphere --dim 2 --profile constant --rho0-deg 90".split())
    assert cfg.rho0 == pytest.approx(np.pi / 2)
    with pytest.raises(ValidationError, match="rho0-deg"):
        cli.parse_config("simulate --space euclidean --profile constant --rho0-deg 90".split())
    with pytest.raises(ValidationError, match="mutually exclusive"):
        cli.parse_config(
            "simulate --space sphere --profile constant --rho0 1 --rho0-deg 90".split())


def test_simulate_t0_single_row(tmp_path, capsys):
    rc = run_main(["simulate", "--space", "sphere", "--dim", "2", "--profile", "constant",
                   "--rho0", "1.0", "--dt", "1e-3", "--T", "0", "--paths", "3",
                   "--seed", "1", "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "paths.csv").read_text().splitlines()
    assert lines[0] == "t,path,dist,target,abs_err"
    assert len(lines) == 4          # header + one row per path
    for row in lines[1:]:
        t, p, dist, target, err = row.split(",")
        assert float(t) == 0.0
        assert float(err) <= 1e-12


def test_simulate_csv_round_trip_and_summary(tmp_path, capsys):
    rc = run_main(["simulate", "--space", "sphere", "--dim", "2", "--profile", "constant",
                   "--rho0", "1.5707963267948966", "--dt", "1e-3", "--T", "0.1",
                   "--paths", "4", "--seed", "7", "--out", str(tmp_path)])
    assert rc == 0
    from detcouple import model_space as ms
    from detcouple import profiles as pf
    from detcouple.sde import simulate_ensemble
    spec = ms.sphere(2)
    x0, y0 = ms.canonical_start(spec, 1.5707963267948966)
    res = simulate_ensemble(spec, pf.constant(1.5707963267948966), x0, y0, 1e-3, 0.1, 7, 4,
                            record_distances=True, workers=1)
    lines = (tmp_path / "paths.csv").read_text().splitlines()[1:]
    for row in lines:
        t, p, dist, target, err = row.split(",")
        i = int(round(float(t) / 1e-3))
        assert float(dist) == res.d_emp[int(p), i]       # 17 digits round-trip bit-exactly
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary) == {"space", "n", "K", "profile", "dt", "T", "paths", "seed",
                            "mean_sup_err", "max_sup_err", "rms_err", "pass"}
    assert summary["pass"] is True and summary["mean_sup_err"] == res.mean_sup_err


def test_simulate_pass_flag_reflects_tolerance(tmp_path, capsys):
    rc = run_main(["simulate", "--space", "sphere", "--dim", "2", "--profile", "constant",
                   "--rho0", "1.0", "--dt", "1e-2", "--T", "0.5", "--paths", "4",
                   "--seed", "3", "--tolerance", "1e-9", "--out", str(tmp_path)])
    assert rc == 1
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["pass"] is False


def test_hyperbolic_constant_rejected(tmp_path, capsys):
    rc = run_main(["simulate", "--space", "hyperbolic", "--dim", "2", "--profile",
                   "constant", "--rho0", "1.0", "--out", str(tmp_path)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "not admissible" in err or "outside" in err
    rc = run_main(["check", "--space", "hyperbolic", "--dim", "2", "--profile",
                   "constant", "--rho0", "1.0", "--T", "1", "--out", str(tmp_path)])
    assert rc == 1
    report = json.loads((tmp_path / "admissibility.json").read_text())
    assert report["admissible"] is False and report["reasons"]


def test_check_contracting_lower_bound_active(tmp_path, capsys):
    rc = run_main(["check", "--space", "sphere", "--dim", "2", "--profile",
                   "sphere-contracting", "--rho0", "1.5707963267948966", "--T", "1",
                   "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "admissibility.json").read_text())
    assert report["admissible"] is True
    assert report["lo_active"] is True and report["hi_active"] is False


def test_determinism_across_runs_and_workers(tmp_path, capsys, monkeypatch):
    argv = ["simulate", "--space", "sphere", "--dim", "2", "--profile", "constant",
            "--rho0", "1.0", "--dt", "1e-3", "--T", "0.2", "--paths", "300",
            "--seed", "5"]
    outs = []
    for threads, sub in (("1", "a"), ("4", "b"), ("2", "c")):
        monkeypatch.setenv("DETCOUPLE_THREADS", threads)
        out = tmp_path / sub
        assert run_main(argv + ["--out", str(out)]) == 0
        outs.append(((out / "paths.csv").read_bytes(), (out / "summary.json").read_bytes()))
    assert outs[0] == outs[1] == outs[2]


def test_converge_subcommand(tmp_path, capsys):
    rc = run_main(["converge", "--space", "sphere", "--dim", "2", "--profile", "constant",
                   "--rho0", "1.5707963", "--T", "0.5", "--paths", "16", "--seed", "2",
                   "--dts", "1e-2,3e-3,1e-3", "--out", str(tmp_path)])
    assert rc == 0
    rows = (tmp_path / "converge.csv").read_text().splitlines()
    assert rows[0] == "dt,mean_sup_err"
    assert len(rows) == 4
    data = json.loads((tmp_path / "converge.json").read_text())
    assert data["pass"] is True and data["details"]["strictly_decreasing"] is True


def test_verify_subcommand_euclidean(tmp_path, capsys):
    rc = run_main(["verify", "--space", "euclidean", "--dim", "3", "--profile",
                   "euclidean-max-growth", "--rho0", "1.0", "--dt", "1e-3", "--T", "0.5",
                   "--paths", "64", "--samples", "2000", "--seed", "11",
                   "--tolerance", "0.1", "--out", str(tmp_path)])
    assert rc == 0
    payload = json.loads((tmp_path / "verify.json").read_text())
    assert payload["pass"] is True
    names = {r["name"] for r in payload["reports"]}
    assert "identity-scan-euclidean-n3" in names
    assert "envelope-bracket" in names


def test_tabulated_profile_end_to_end(tmp_path, capsys):
    ts = np.linspace(0.0, 0.5, 201)
    rho = np.sqrt(1.0 + 8.0 * ts)    # max growth for n = 3
    table = tmp_path / "profile.csv"
    table.write_text("t,rho\n" + "\n".join(f"{a:.17g},{b:.17g}" for a, b in zip(ts, rho)))
    rc = run_main(["simulate", "--space", "euclidean", "--dim", "3", "--profile",
                   "tabulated", "--table", str(table), "--dt", "1e-3", "--T", "0.5",
                   "--paths", "8", "--seed", "13", "--clamp-derivative",
                   "--tolerance", "0.2", "--out", str(tmp_path)])
    assert rc == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["profile"] == "tabulated"


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "detcouple.cli", "check", "--space", "sphere", "--dim", "2",
         "--profile", "constant", "--rho0", "1.0", "--T", "1", "--out", str(tmp_path)],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "admissible" in proc.stdout

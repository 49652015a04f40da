"""Command-line interface: subcommands, flags, exit codes, file outputs."""

import csv
import filecmp
import json
import shutil
import subprocess

import numpy as np
import pytest

from gfabsorb import ChainPath
from gfabsorb.cli import main

TINY_CFG = """
grid_size = 60
est_grid_size = 50
m = 4
m_hit = 3
curve_points = 21
quad_tol = 1e-6
est_quad_tol = 1e-4
x_max = 200.0
ns = 12
replicates = 1
traj_count = 1
"""


@pytest.fixture()
def cfg_file(tmp_path):
    f = tmp_path / "tiny.cfg"
    f.write_text(TINY_CFG, encoding="utf-8")
    return str(f)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


class TestUsageErrors:
    def test_no_command(self):
        with pytest.raises(SystemExit) as e:
            main([])
        assert e.value.code == 1

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as e:
            main(["frobnicate"])
        assert e.value.code == 1

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as e:
            main(["solve", "--bogus", "1"])
        assert e.value.code == 1

    def test_missing_data_file(self, tmp_path, capsys):
        rc = main(["estimate", "--data", str(tmp_path / "nope.csv")])
        assert rc == 1
        assert "nope.csv" in capsys.readouterr().err

    def test_malformed_data_file(self, tmp_path, capsys):
        f = tmp_path / "bad.csv"
        f.write_text("a,b\n1,2\n", encoding="utf-8")
        rc = main(["estimate", "--data", str(f)])
        assert rc == 1
        assert "columns" in capsys.readouterr().err


class TestSimulate:
    def test_chain_round_trip(self, tmp_path):
        out = tmp_path / "chain.csv"
        rc = main(["simulate", "--seed", "7", "--out", str(out)])
        assert rc == 0
        path = ChainPath.read_csv(out)
        assert path.x0 == 2.0
        assert len(path.z) >= 1

    def test_chain_deterministic_per_seed(self, tmp_path):
        a, b, c = (tmp_path / name for name in ("a.csv", "b.csv", "c.csv"))
        main(["simulate", "--seed", "7", "--out", str(a)])
        main(["simulate", "--seed", "7", "--out", str(b)])
        main(["simulate", "--seed", "8", "--out", str(c)])
        assert filecmp.cmp(a, b, shallow=False)
        assert not filecmp.cmp(a, c, shallow=False)

    def test_trajectory_rows(self, tmp_path):
        out = tmp_path / "traj.csv"
        rc = main(["simulate", "--trajectory", "--horizon", "3.0",
                   "--seed", "5", "--out", str(out)])
        assert rc == 0
        rows = read_csv(out)
        assert rows[0] == ["t", "x"]
        t = [float(r[0]) for r in rows[1:]]
        assert t[0] == 0.0 and t[-1] == 3.0

    def test_stdout_when_no_out(self, capsys):
        rc = main(["simulate", "--seed", "7", "--max-jumps", "5"])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.startswith("k,s_k,y_k,z_k")
        assert "0,,,2.0" in out


class TestEstimate:
    def test_synthetic_report(self, capsys, cfg_file):
        rc = main(["estimate", "--config", cfg_file, "--n", "40", "--seed", "3"])
        assert rc == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["n"] == 40
        assert 0.5 <= rep["lambda_hat"] <= 2.0
        assert rep["sup_norm"] > 0.0

    def test_from_data_file(self, tmp_path, capsys):
        f = tmp_path / "obs.csv"
        rows = ["s,y"] + [f"{0.5 + 0.01 * i},{0.90 + 0.001 * i}" for i in range(40)]
        f.write_text("\n".join(rows) + "\n", encoding="utf-8")
        rc = main(["estimate", "--data", str(f)])
        assert rc == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["n"] == 40


class TestKernel:
    def test_curve_schema(self, tmp_path, cfg_file):
        out = tmp_path / "kernel.csv"
        rc = main(["kernel", "--config", cfg_file, "--n", "30", "--x", "2.0",
                   "--seed", "11", "--out", str(out)])
        assert rc == 0
        rows = read_csv(out)
        assert rows[0] == ["x", "y", "R", "R_hat", "abs_err"]
        assert len(rows) == 1 + 21
        for r in rows[1:]:
            x, y, ref, hat, err = map(float, r)
            assert x == 2.0
            np.testing.assert_allclose(err, abs(ref - hat), rtol=1e-12)


class TestSolve:
    def test_csv_and_report_split_streams(self, tmp_path, capsys, cfg_file):
        out = tmp_path / "p.csv"
        rc = main(["solve", "--config", cfg_file, "--out", str(out)])
        assert rc == 0
        rows = read_csv(out)
        assert rows[0] == ["x", "p_m"]
        assert len(rows) == 1 + 60
        report = json.loads(capsys.readouterr().out)
        assert report["m"] == 4
        np.testing.assert_allclose(report["kappa"], 0.55, atol=1e-9)

    def test_report_to_stderr_without_out(self, capsys, cfg_file):
        rc = main(["solve", "--config", cfg_file])
        assert rc == 0
        got = capsys.readouterr()
        assert got.out.splitlines()[0] == "x,p_m"
        assert json.loads(got.err)["m"] == 4

    def test_flag_beats_config(self, tmp_path, capsys, cfg_file):
        out = tmp_path / "p.csv"
        rc = main(["solve", "--config", cfg_file, "--grid-size", "40",
                   "--out", str(out)])
        assert rc == 0
        assert len(read_csv(out)) == 1 + 40

    def test_supercritical_is_numerical_failure(self, tmp_path, capsys):
        f = tmp_path / "bad.cfg"
        f.write_text("lam = 20.0\ngrid_size = 30\nx_max = 50.0\n", encoding="utf-8")
        rc = main(["solve", "--config", str(f)])
        assert rc == 2
        assert "kappa" in capsys.readouterr().err


class TestHitting:
    def test_schema(self, tmp_path, cfg_file):
        out = tmp_path / "t.csv"
        rc = main(["hitting", "--config", cfg_file, "--out", str(out)])
        assert rc == 0
        rows = read_csv(out)
        assert rows[0] == ["x", "t_1", "t_2", "t_3"]
        assert len(rows) == 1 + 60
        vals = np.array([[float(c) for c in r] for r in rows[1:]])
        assert np.all(vals[:, 1:] >= 0.0)


class TestValidate:
    def test_agreement_report(self, capsys, cfg_file):
        rc = main(["validate", "--config", cfg_file, "--x0", "1.5",
                   "--paths", "20000", "--seed", "19"])
        assert rc == 0
        rep = json.loads(capsys.readouterr().out)
        assert set(rep) >= {"x0", "p_solver", "p_mc", "abs_diff",
                            "bound_3se_tail_trunc", "agrees", "solver", "mc"}
        assert rep["x0"] == 1.5
        assert rep["agrees"] is True
        assert rep["mc"]["n_paths"] == 20000


class TestReplicate:
    def test_tiny_sweep_emits_figures(self, tmp_path, capsys, cfg_file):
        outdir = tmp_path / "figs"
        rc = main(["replicate", "--config", cfg_file, "--ns", "12",
                   "--replicates", "1", "--out", str(outdir)])
        assert rc == 0
        printed = capsys.readouterr().out.splitlines()
        assert len(printed) == 8
        for p in printed:
            assert (outdir / p.split("/")[-1]).exists()


def test_console_script_installed():
    exe = shutil.which("gfabsorb")
    assert exe, "console script gfabsorb must be on PATH"
    proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("simulate", "estimate", "kernel", "solve", "hitting",
                "validate", "replicate"):
        assert cmd in proc.stdout

"""Subcommand behavior: output formats, exit codes, and error reporting."""

import json

import numpy as np
import pytest

import exindex as ex
from exindex.cli import dispatch

SERIES = [5.0, 1.0, 4.0, 2.0, 3.0, 6.0]


@pytest.fixture
def series_file(tmp_path):
    path = tmp_path / "x.txt"
    path.write_text("".join(f"{v}\n" for v in SERIES))
    return str(path)


def test_blocks_hand_example(series_file, capsys):
    rc = dispatch(["blocks", "--series", series_file, "--r", "3", "--u", "3.5"])
    assert rc == 0
    assert capsys.readouterr().out == "0.666666666667\n"


def test_runs_hand_example(series_file, capsys):
    rc = dispatch(["runs", "--series", series_file, "--run-length", "2", "--u", "3.5"])
    assert rc == 0
    assert capsys.readouterr().out == "0.5\n"


def test_blocks_no_exceedances_exit_code(series_file, capsys):
    rc = dispatch(["blocks", "--series", series_file, "--r", "3", "--u", "10"])
    assert rc == 1
    assert capsys.readouterr().err.startswith("NO_EXCEEDANCES:")


def test_sweep_default_grid(series_file, capsys):
    rc = dispatch(["sweep", "--series", series_file, "--r", "3", "--k", "4"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "t,k_t,theta_hat,variant,flag"
    assert lines[1] == "0.25,1,1,empirical_quantile,"
    assert lines[3] == "0.75,3,0.666666666667,empirical_quantile,"
    assert lines[4] == "1,4,0.5,empirical_quantile,"


def test_sweep_grid_forms_and_out(series_file, tmp_path, capsys):
    out = tmp_path / "curve.csv"
    rc = dispatch(
        ["sweep", "--series", series_file, "--r", "3", "--k", "4", "--grid", "0.5,1.0",
         "--out", str(out)]
    )
    assert rc == 0
    assert capsys.readouterr().out == ""
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 3
    rc = dispatch(["sweep", "--series", series_file, "--r", "3", "--k", "4", "--grid", "2"])
    assert rc == 0
    body = capsys.readouterr().out.strip().splitlines()[1:]
    assert [line.split(",")[0] for line in body] == ["0.5", "1"]


def test_correct_point_estimate(tmp_path, capsys):
    rng = np.random.default_rng(0)
    path = tmp_path / "x.txt"
    path.write_text("".join(f"{v}\n" for v in rng.random(200)))
    rc = dispatch(
        ["correct", "--series", str(path), "--r", "5", "--k", "40", "--two-atom", "0.5,1,2"]
    )
    captured = capsys.readouterr()
    if rc == 0:
        float(captured.out.strip())
    else:
        assert captured.err.startswith("DEGENERATE_DENOMINATOR:")


def test_correct_degenerate_reports_fallback(tmp_path, capsys):
    # r=1 makes the curve constant 1, so the combination denominator vanishes
    path = tmp_path / "x.txt"
    path.write_text("".join(f"{v}\n" for v in np.arange(1.0, 41.0)))
    rc = dispatch(
        ["correct", "--series", str(path), "--r", "1", "--k", "8", "--two-atom", "0.5,1,2"]
    )
    assert rc == 1
    err = capsys.readouterr().err
    assert err.startswith("DEGENERATE_DENOMINATOR:")
    assert "(fallback 1)" in err


def test_correct_requires_one_measure_flag(series_file, capsys):
    rc = dispatch(["correct", "--series", series_file, "--r", "3", "--k", "4"])
    assert rc == 2
    assert "usage error" in capsys.readouterr().err
    rc = dispatch(
        ["correct", "--series", series_file, "--r", "3", "--k", "4",
         "--two-atom", "0.5,1,2", "--product", "1,2,2,2"]
    )
    assert rc == 2
    assert "usage error" in capsys.readouterr().err


def test_check_measure_two_atom_report(capsys):
    rc = dispatch(["check-measure", "--two-atom", "0.5,1,2", "--delta", "1"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "m1 pass" in out
    assert "m2 pass" in out
    assert "m2_integral[1] 0.25" in out
    assert "m3_value 8" in out
    assert "total_weight 0" in out


def test_check_measure_single_atom_fails_m1(tmp_path, capsys):
    path = tmp_path / "mu.csv"
    path.write_text("s,t,w\n0.5,0.5,1.0\n")
    rc = dispatch(["check-measure", "--in", str(path)])
    assert rc == 1
    assert capsys.readouterr().err.startswith("M1_VIOLATION:")


def test_check_measure_equal_levels_fails_m2(capsys):
    rc = dispatch(["check-measure", "--two-atom", "0.5,0.5,2"])
    assert rc == 1
    assert capsys.readouterr().err.startswith("M2_VIOLATION:")


def test_check_measure_writes_csv(tmp_path, capsys):
    out = tmp_path / "mu.csv"
    rc = dispatch(["check-measure", "--product", "1,2,3,2", "--out", str(out)])
    assert rc == 0
    capsys.readouterr()
    assert ex.read_measure_csv(out).atoms == ex.product_measure(1.0, 2.0, 3.0, 2).atoms


def test_oracle_wn_r1_identity(capsys):
    rc = dispatch(
        ["oracle", "--model", "wn", "--psi", "0.6", "--r", "1", "--v", "0.01", "--t", "0.5"]
    )
    assert rc == 0
    lines = dict(line.split(" ", 1) for line in capsys.readouterr().out.strip().splitlines())
    assert float(lines["theta_nt"]) == pytest.approx(1.0, abs=1e-12)
    assert float(lines["theta_n"]) == pytest.approx(1.0)  # theta + (1 - theta) / 1
    assert float(lines["delta"]) == 1.0


def test_oracle_mm_reports_branch(capsys):
    rc = dispatch(
        ["oracle", "--model", "mm", "--coeffs", "1,0.5", "--beta1", "2", "--beta2", "1",
         "--c1", "1", "--c2", "0.5", "--r", "10", "--v", "0.01", "--t", "1"]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "branch linear" in out
    assert "d " in out


def test_oracle_ar1_has_no_closed_form(capsys):
    rc = dispatch(
        ["oracle", "--model", "ar1_cauchy", "--phi", "0.6", "--r", "5", "--v", "0.01",
         "--t", "1"]
    )
    assert rc == 2
    assert "usage error" in capsys.readouterr().err


def test_simulate_deterministic_12_digits(capsys):
    argv = ["simulate", "--model", "wn", "--psi", "0.6", "--n", "5", "--seed", "3"]
    assert dispatch(argv) == 0
    first = capsys.readouterr().out
    assert dispatch(argv) == 0
    assert capsys.readouterr().out == first
    lines = first.strip().splitlines()
    assert len(lines) == 5
    for line in lines:
        assert line == f"{float(line):.12g}"  # 12-significant-digit convention


def test_simulate_requires_model_params(capsys):
    rc = dispatch(["simulate", "--model", "wn", "--n", "5"])
    assert rc == 2
    assert "usage error" in capsys.readouterr().err


def test_kernel_iid_closed_form(capsys):
    rc = dispatch(
        ["kernel", "--model", "iid", "--s", "0.5", "--t", "1"]
    )
    assert rc == 0
    lines = dict(line.split(" ", 1) for line in capsys.readouterr().out.strip().splitlines())
    assert float(lines["c"]) == 0.0
    assert float(lines["c_g"]) == 0.5
    assert float(lines["c_fg_st"]) == 0.5
    assert float(lines["c_fg_ts"]) == 0.5


def test_kernel_flag_requirements(capsys):
    rc = dispatch(
        ["kernel", "--model", "wn", "--psi", "0.6", "--s", "1", "--t", "1",
         "--method", "tail"]
    )
    assert rc == 2  # --v missing
    capsys.readouterr()
    rc = dispatch(
        ["kernel", "--model", "iid", "--s", "1", "--t", "1", "--method", "mc"]
    )
    assert rc == 2  # --r/--k missing
    capsys.readouterr()


def test_kernel_tail_method_runs(capsys):
    rc = dispatch(
        ["kernel", "--model", "wn", "--psi", "0.6", "--s", "1", "--t", "1",
         "--method", "tail", "--v", "0.02", "--n", "5000", "--replicates", "100"]
    )
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [line.split(" ")[0] for line in lines] == ["c", "c_g", "c_fg_st", "c_fg_ts"]


def test_mc_runs_config(tmp_path, capsys):
    out_dir = tmp_path / "exp"
    cfg = ex.ExperimentConfig(
        model=ex.RandomRepetition(psi=0.6, innovation=ex.Uniform01()),
        n=400,
        r_list=(5,),
        k=40,
        t_grid=(0.5, 1.0),
        measure=ex.two_atom_measure(0.5, 1.0, 2.0),
        replicates=5,
        out_dir=str(out_dir),
    )
    config_path = tmp_path / "exp.json"
    config_path.write_text(json.dumps(cfg.to_dict()))
    rc = dispatch(["mc", "--config", str(config_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.count("wrote ") == 3
    assert (out_dir / "curves.csv").exists()
    # byte-identical rerun
    before = (out_dir / "curves.csv").read_bytes()
    assert dispatch(["mc", "--config", str(config_path)]) == 0
    capsys.readouterr()
    assert (out_dir / "curves.csv").read_bytes() == before


def test_mc_requires_out_dir(tmp_path, capsys):
    cfg = ex.ExperimentConfig(
        model=ex.IID(innovation=ex.Uniform01()),
        n=200,
        r_list=(5,),
        k=20,
        t_grid=(1.0,),
        replicates=2,
    )
    config_path = tmp_path / "exp.json"
    config_path.write_text(json.dumps(cfg.to_dict()))
    rc = dispatch(["mc", "--config", str(config_path)])
    assert rc == 2
    assert "usage error" in capsys.readouterr().err


def test_usage_and_io_errors(tmp_path, capsys):
    assert dispatch(["blocks", "--bogus"]) == 2
    capsys.readouterr()
    assert dispatch([]) == 2
    capsys.readouterr()
    rc = dispatch(["blocks", "--series", str(tmp_path / "nope.txt"), "--r", "3", "--u", "1"])
    assert rc == 1
    assert capsys.readouterr().err.startswith("IO_ERROR:")
    bad = tmp_path / "bad.txt"
    bad.write_text("not-a-number\n")
    rc = dispatch(["blocks", "--series", str(bad), "--r", "3", "--u", "1"])
    assert rc == 1
    assert capsys.readouterr().err.startswith("INVALID_ARGUMENT:")


def test_version_flag(capsys):
    assert dispatch(["--version"]) == 0
    assert "exindex" in capsys.readouterr().out

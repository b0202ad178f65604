import math
import subprocess
import sys

import numpy as np
import pytest

from knnentropy.cli import main


def test_estimate_csv_input(tmp_path, capsys):
    path = tmp_path / "pts.csv"
    path.write_text("# three points\n0\n1\n3\n")
    assert main(["estimate", "--input", str(path)]) == 0
    header, row = capsys.readouterr().out.splitlines()
    assert header == "value,unit,n,k,dropped_points"
    assert float(row.split(",")[0]) == pytest.approx(1.5 + math.log(2) + math.log(2) / 3)


def test_estimate_bits(tmp_path, capsys):
    path = tmp_path / "pts.csv"
    path.write_text("0\n1\n3\n")
    assert main(["estimate", "--input", str(path), "--unit", "bits"]) == 0
    value = float(capsys.readouterr().out.splitlines()[1].split(",")[0])
    assert value == pytest.approx((1.5 + math.log(2) + math.log(2) / 3) / math.log(2))


def test_estimate_duplicates(tmp_path, capsys):
    path = tmp_path / "dup.csv"
    path.write_text("0\n1\n1\n3\n")
    assert main(["estimate", "--input", str(path)]) == 2
    assert main(["estimate", "--input", str(path), "--mode", "lenient"]) == 0
    assert capsys.readouterr().out.splitlines()[-1].endswith(",2")


def test_estimate_sampled_to_file(tmp_path):
    out = tmp_path / "est.csv"
    assert main(["estimate", "--dist", "gaussian", "--n", "2000", "--seed", "1", "--out", str(out)]) == 0
    value = float(out.read_text().splitlines()[1].split(",")[0])
    assert abs(value - 1.4189385) < 0.15


def test_missing_file():
    assert main(["estimate", "--input", "/nonexistent/file.csv"]) == 1


def test_malformed_file(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0\nabc\n")
    assert main(["estimate", "--input", str(path)]) == 1


def test_mi_modes(capsys):
    assert main(["mi", "--rho", "0.5", "--n", "3000", "--seed", "2"]) == 0
    value = float(capsys.readouterr().out.splitlines()[1].split(",")[0])
    assert abs(value - 0.143841) < 0.1
    assert main(["mi", "--independent", "uniform_cube", "--n", "1000"]) == 0
    assert main(["mi"]) == 1


def test_mi_degenerate_warns(tmp_path, capsys):
    x = np.random.default_rng(0).normal(size=200)
    (tmp_path / "x.csv").write_text("\n".join(repr(float(v)) for v in x))
    (tmp_path / "y.csv").write_text("\n".join(repr(float(v) + 1.0) for v in x))
    assert main(["mi", "--x", str(tmp_path / "x.csv"), "--y", str(tmp_path / "y.csv")]) == 0
    captured = capsys.readouterr()
    assert "warning" in captured.err
    assert captured.out.splitlines()[1].endswith(",1")


def test_sweep_flags(capsys):
    assert main(["sweep", "--dist", "uniform_torus", "--n-grid", "20,40", "--trials", "5"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("#schema: bias_sweep")


def test_sweep_config(tmp_path):
    cfg = tmp_path / "s.cfg"
    out = tmp_path / "s.csv"
    cfg.write_text("experiment = variance_sweep\nfamily = gaussian\nn_grid = 30,60\ntrials = 4\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    assert out.read_text().startswith("#schema: variance_sweep")
    cfg.write_text("experiment = variance_sweep\n")
    assert main(["sweep", "--config", str(cfg)]) == 1


def test_concentration_and_moments(capsys):
    assert main(["concentration", "--trials", "500", "--n", "50"]) == 0
    assert main(["moments", "--trials", "500", "--alpha", "1,-0.5"]) == 0
    assert main(["moments", "--trials", "50", "--alpha", "-3"]) == 2


class TestBounds:
    def test_single_value(self, capsys):
        args = ["bounds", "--kind", "concentration_upper", "--k", "1", "--n", "100", "--D", "1",
                "--gamma-star", "2", "--r", "0.05"]
        assert main(args) == 0
        row = capsys.readouterr().out.splitlines()[2].split(",")
        assert float(row[1]) == pytest.approx(1.2341e-3, abs=1e-7)

    def test_invalid_window(self):
        assert main(["bounds", "--kind", "variance", "--k", "1", "--n", "15", "--N-k", "2",
                     "--M-4", "1"]) == 2

    def test_grid(self, capsys):
        assert main(["bounds", "--kind", "bias", "--k", "1", "--D", "1", "--beta", "1",
                     "--C-beta", "1", "--Gamma-B", "1", "--c-D", "2", "--sweep-param", "n",
                     "--grid", "100,200,400"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[1] == "parameter,raw_bound,clamped_bound,validity_flag"
        assert float(lines[2].split(",")[1]) == pytest.approx(0.09)

    def test_usage_errors(self):
        assert main(["bounds", "--kind", "bias", "--sweep-param", "n"]) == 1
        assert main(["bounds", "--kind", "bias", "--sweep-param", "zz", "--grid", "1"]) == 1

    def test_bad_kind(self):
        with pytest.raises(SystemExit) as info:
            main(["bounds", "--kind", "bogus"])
        assert info.value.code == 1


def test_identity(capsys):
    assert main(["identity", "--trials", "30", "--n", "200", "--k", "1,3"]) == 0
    assert capsys.readouterr().out.startswith("#schema: digamma_identity")


def test_no_command():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "knnentropy", "bounds", "--kind", "moment_ceiling",
                           "--alpha", "4", "--lambda", "2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert float(proc.stdout.splitlines()[2].split(",")[1]) == 1.5

import csv
import io
import math
import subprocess
import sys

import numpy as np
import pytest

from cauchy_sketch.cli import EXIT_ERROR, EXIT_OK, EXIT_USAGE, main
from cauchy_sketch.projection import sketch_from_bytes, sketch_read


def read_table(text):
    lines = text.splitlines()
    assert lines[0].startswith("# cauchy-sketch ")
    return lines[0], list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


@pytest.fixture
def data_csv(tmp_path):
    A = np.random.default_rng(0).random((5, 30))
    A[3] = A[1]  # identical rows
    path = tmp_path / "data.csv"
    np.savetxt(path, A, delimiter=",", fmt="%.17g")
    return path, A


@pytest.fixture
def sketch_path(tmp_path, data_csv, capsys):
    out = tmp_path / "b.sk"
    assert main(["project", "--in", str(data_csv[0]), "--out", str(out), "--k", "40", "--seed", "7"]) == EXIT_OK
    capsys.readouterr()
    return out


def test_project_summary_and_file(tmp_path, data_csv, capsys):
    out = tmp_path / "s.sk"
    code = main(["project", "--in", str(data_csv[0]), "--out", str(out), "--k", "40", "--seed", "7"])
    assert code == EXIT_OK
    assert capsys.readouterr().out.strip() == "n=5 D=30 k=40 seed=7 kind=cauchy"
    sk = sketch_read(out)
    assert sk.values.shape == (5, 40)


def test_project_is_reproducible(tmp_path, data_csv, capsys):
    a, b = tmp_path / "a.sk", tmp_path / "b.sk"
    for path in (a, b):
        main(["project", "--in", str(data_csv[0]), "--out", str(path), "--k", "12", "--seed", "3",
              "--kind", "sparse", "--s", "3"])
    assert a.read_bytes() == b.read_bytes()
    assert sketch_read(a).config.kind.tag == "sparse"


def test_project_to_stdout(data_csv, capfdbinary):
    assert main(["project", "--in", str(data_csv[0]), "--out", "-", "--k", "8"]) == EXIT_OK
    captured = capfdbinary.readouterr()
    assert sketch_from_bytes(captured.out).values.shape == (5, 8)
    assert captured.err.decode().startswith("n=5 ")


def test_missing_input_is_usage_error(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code = main(["project", "--in", str(missing), "--out", str(tmp_path / "x.sk"), "--k", "5"])
    assert code == EXIT_USAGE
    assert str(missing) in capsys.readouterr().err


def test_malformed_input(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n4,5\n")
    assert main(["project", "--in", str(bad), "--out", str(tmp_path / "x.sk"), "--k", "5"]) == EXIT_ERROR
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and "RaggedRowsError" in err


def test_header_option(tmp_path, capsys):
    path = tmp_path / "h.csv"
    path.write_text("a;b;c\n1;2;3\n4;5;6\n")
    assert main(["project", "--in", str(path), "--out", str(tmp_path / "h.sk"), "--k", "4",
                 "--delimiter", ";", "--header"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("n=2 D=3 ")


def test_pairwise_all_pairs(sketch_path, data_csv, capsys):
    assert main(["pairwise", "--sketch", str(sketch_path), "--estimator", "gm_c"]) == EXIT_OK
    captured = capsys.readouterr()
    head, rows = read_table(captured.out)
    assert " pairwise " in head
    assert len(rows) == 10
    assert captured.err.strip() == "pairs=10 errors=0 flagged=0"
    by_pair = {(int(r["i"]), int(r["j"])): float(r["estimate"]) for r in rows}
    assert by_pair[(1, 3)] == 0.0
    A = data_csv[1]
    truth = np.abs(A[0] - A[2]).sum()
    assert 0.3 * truth < by_pair[(0, 2)] < 3 * truth


def test_pairwise_pair_list_and_errors(tmp_path, sketch_path, capsys):
    pairs = tmp_path / "pairs.csv"
    pairs.write_text("i,j\n0,1\n1,3\n2,9\n")
    assert main(["pairwise", "--sketch", str(sketch_path), "--estimator", "mle_c",
                 "--pairs", str(pairs)]) == EXIT_OK
    captured = capsys.readouterr()
    _, rows = read_table(captured.out)
    assert [r["status"] for r in rows] == ["ok", "all_zero", "error:IndexOutOfRangeError"]
    assert math.isnan(float(rows[2]["estimate"]))
    assert captured.err.strip() == "pairs=3 errors=1 flagged=1"


def test_estimate_single_pair(sketch_path, capsys):
    assert main(["estimate", "--sketch", str(sketch_path), "--i", "0", "--j", "4", "--estimator", "me"]) == EXIT_OK
    _, rows = read_table(capsys.readouterr().out)
    assert rows[0]["estimator"] == "me" and float(rows[0]["estimate"]) > 0
    # the corrected median needs odd k; this sketch has k = 40
    assert main(["estimate", "--sketch", str(sketch_path), "--i", "0", "--j", "4", "--estimator", "me_c"]) == EXIT_ERROR
    assert "EvenKError" in capsys.readouterr().err


def test_estimator_kind_mismatch(sketch_path, capsys):
    assert main(["pairwise", "--sketch", str(sketch_path), "--estimator", "l2sq"]) == EXIT_ERROR
    assert "EstimatorKindMismatchError" in capsys.readouterr().err


def test_corrupt_sketch(tmp_path, sketch_path, capsys):
    bad = tmp_path / "bad.sk"
    bad.write_bytes(sketch_path.read_bytes()[:-3])
    assert main(["pairwise", "--sketch", str(bad)]) == EXIT_ERROR
    assert "ChecksumMismatchError" in capsys.readouterr().err


def test_plan(capsys):
    assert main(["plan", "--n", "100", "--eps", "0.5", "--delta", "0.05"]) == EXIT_OK
    _, rows = read_table(capsys.readouterr().out)
    assert rows[0]["k"] == "586" and rows[0]["binding_constraint"] == "jl_formula"
    assert main(["plan", "--norm", "l2", "--n", "100", "--eps", "0.5", "--delta", "0.05"]) == EXIT_OK
    assert read_table(capsys.readouterr().out)[1][0]["k"] == "293"
    assert main(["plan", "--n", "1", "--eps", "0.5", "--delta", "0.05"]) == EXIT_ERROR


def test_bias_table(capsys):
    assert main(["bias-table", "--max-k", "41"]) == EXIT_OK
    _, rows = read_table(capsys.readouterr().out)
    b = [float(r["b_me"]) for r in rows]
    assert [int(r["k"]) for r in rows] == list(range(3, 42, 2))
    assert all(x > y for x, y in zip(b, b[1:])) and b[-1] < 1.03 * 1.05


def test_bounds_gm(capsys):
    assert main(["bounds", "--k", "50", "--eps", "0.1,0.5,1.0"]) == EXIT_OK
    _, rows = read_table(capsys.readouterr().out)
    assert len(rows) == 3
    for r in rows:
        assert float(r["markov_upper"]) <= float(r["exponential_upper"])
    assert rows[0]["exponential_lower_valid"] == "false" and rows[1]["exponential_lower_valid"] == "true"
    assert main(["bounds", "--k", "50", "--eps", "0.5", "--constant", "3"]) == EXIT_ERROR


def test_bounds_mle_to_file(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert main(["bounds", "--estimator", "mle", "--k", "100", "--eps", "0.5", "--out", str(out)]) == EXIT_OK
    _, rows = read_table(out.read_text())
    assert float(rows[0]["ig_chernoff_symmetric"]) == pytest.approx(3.30e-2, rel=2e-3)


def test_simulate_modes(capsys):
    assert main(["simulate", "--estimator", "gm_c", "--k", "10", "--R", "2000", "--seed", "1"]) == EXIT_OK
    head, rows = read_table(capsys.readouterr().out)
    assert "R=2000" in head and [r["moment"] for r in rows] == ["mean", "variance", "mu3", "mu4"]
    assert main(["simulate", "--mode", "tail", "--estimator", "mle_c", "--k", "20", "--R", "2000",
                 "--eps-grid", "0.1,0.3"]) == EXIT_OK
    assert len(read_table(capsys.readouterr().out)[1]) == 2
    assert main(["simulate", "--mode", "histogram", "--k", "10", "--R", "2000", "--bins", "20"]) == EXIT_OK
    assert sum(int(r["count"]) for r in read_table(capsys.readouterr().out)[1]) == 2000
    assert main(["simulate", "--mode", "mse", "--k-list", "3,5,6", "--R", "2000"]) == EXIT_OK
    assert [r["status"] for r in read_table(capsys.readouterr().out)[1]] == ["infinite", "ok", "invalid"]
    assert main(["simulate", "--R", "10"]) == EXIT_ERROR


def test_simulate_is_deterministic(capsys):
    argv = ["simulate", "--estimator", "me_c", "--k", "11", "--R", "3000", "--seed", "5"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cauchy_sketch", "plan", "--n", "2", "--eps", "1",
                          "--delta", "0.99"], capture_output=True, text=True, check=True)
    assert read_table(res.stdout)[1][0]["k"] == "23"
    res = subprocess.run([sys.executable, "-m", "cauchy_sketch", "plan"], capture_output=True, text=True)
    assert res.returncode == EXIT_USAGE

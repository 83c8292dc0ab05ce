import subprocess
import sys

import numpy as np
import pytest

from edgeswitch.cli import main
from edgeswitch.graph import degree_sequence_of, is_graphical, read_edge_list
from edgeswitch.report import read_rows


@pytest.fixture
def pld_file(tmp_path):
    path = tmp_path / "pld.txt"
    assert main(["gen", "pld", "--n", "1000", "--gamma", "2.5", "--seed", "3", "--out", str(path)]) == 0
    return path


def test_gen_gnp_complete(tmp_path, capsys):
    out = tmp_path / "k4.txt"
    assert main(["gen", "gnp", "--n", "4", "--p", "1", "--seed", "1", "--out", str(out)]) == 0
    assert read_edge_list(out).m == 6
    assert "m=6" in capsys.readouterr().out


def test_gen_pld_reload(pld_file):
    g = read_edge_list(pld_file)
    assert g.is_simple() and g.n == 1000
    assert is_graphical(degree_sequence_of(g))


def test_gen_reproducible(tmp_path, pld_file):
    again = tmp_path / "again.txt"
    main(["gen", "pld", "--n", "1000", "--gamma", "2.5", "--seed", "3", "--out", str(again)])
    assert again.read_bytes() == pld_file.read_bytes()


def test_missing_seed_is_echoed(tmp_path, capsys):
    main(["gen", "gnp", "--n", "5", "--p", "0.5", "--out", str(tmp_path / "g.txt")])
    assert capsys.readouterr().err.startswith("seed: ")


def test_randomize_zero_supersteps(tmp_path, pld_file):
    out = tmp_path / "out.txt"
    assert main(["randomize", str(pld_file), str(out), "--supersteps", "0", "--seed", "1"]) == 0
    a, b = read_edge_list(pld_file), read_edge_list(out)
    assert np.array_equal(np.sort(a.canonical_words()), np.sort(b.canonical_words()))


@pytest.mark.parametrize("algo", ["es", "global-es", "eager-es", "steady-global-es"])
def test_randomize_keeps_degrees(tmp_path, pld_file, algo):
    out = tmp_path / "out.txt"
    report = tmp_path / "report.csv"
    assert main(["randomize", str(pld_file), str(out), "--algo", algo, "--supersteps", "3", "--threads", "2",
                 "--seed", "4", "--report", str(report)]) == 0
    g0, g1 = read_edge_list(pld_file), read_edge_list(out)
    assert g1.is_simple()
    assert np.array_equal(degree_sequence_of(g0), degree_sequence_of(g1))
    rows = read_rows(report)
    assert [r["superstep"] for r in rows] == [1, 2, 3]
    assert all(r["accepted"] >= 0 for r in rows)


def test_randomize_thread_count_does_not_change_output(tmp_path, pld_file):
    paths = []
    for threads in (1, 4):
        p = tmp_path / f"out{threads}.txt"
        main(["randomize", str(pld_file), str(p), "--threads", str(threads), "--supersteps", "5", "--seed", "9"])
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_sort_output(tmp_path, pld_file):
    out = tmp_path / "sorted.txt"
    main(["randomize", str(pld_file), str(out), "--supersteps", "2", "--seed", "1", "--sort-output"])
    words = read_edge_list(out).words()
    assert (np.diff(words.astype(np.int64)) > 0).all()


def test_bench_rows(tmp_path, pld_file, capsys):
    out = tmp_path / "bench.csv"
    assert main(["bench", str(pld_file), "--supersteps", "4", "--repetitions", "3", "--threads", "2",
                 "--seed", "1", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert sum(r["phase"] == "init" for r in rows) == 3
    steps = [r for r in rows if r["phase"] == "supersteps"]
    assert len(steps) == 3
    assert all(1 <= r["rounds_mean"] <= 10 for r in steps)


def test_analyze_mixing_csv(tmp_path, capsys):
    out = tmp_path / "mix.csv"
    assert main(["analyze-mixing", "--algo", "es", "--supersteps", "40", "--runs", "2", "--n", "32",
                 "--schedule", "1,2", "--seed", "1", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert [r["k"] for r in rows] == [1, 2]
    assert rows[0]["runs"] == 2


def test_verify_uniformity(tmp_path, capsys):
    hist = tmp_path / "hist.csv"
    code = main(["verify-uniformity", "--degrees", "2,2,2,2,2", "--algo", "global-es", "--samples", "6000",
                 "--seed", "2", "--histogram", str(hist)])
    assert code == 0
    assert capsys.readouterr().out.startswith("PASS")
    rows = read_rows(hist)
    assert len(rows) == 12 and sum(r["count"] for r in rows) == 6000


@pytest.mark.parametrize("argv", [
    ["randomize", "missing.txt", "out.txt"],
    ["randomize", "x", "y", "--threads", "0"],
    ["randomize", "x", "y", "--threads", "255"],
    ["randomize", "x", "y", "--pl", "1.0"],
    ["randomize", "x", "y", "--supersteps", "-1"],
    ["gen", "gnp", "--n", "4", "--p", "2", "--out", "z.txt"],
    ["verify-uniformity", "--degrees", "3,1,1"],
    ["verify-uniformity", "--degrees", "1,1,1,1,1,1,1,1,1,1"],
])
def test_invalid_input_exit_code(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2


def test_sanitize(tmp_path):
    dirty = tmp_path / "dirty.txt"
    dirty.write_text("0 1\n1 0\n2 2\n1 2\n")
    out = tmp_path / "clean.txt"
    assert main(["randomize", str(dirty), str(out), "--supersteps", "1", "--seed", "1"]) == 2
    assert main(["randomize", str(dirty), str(out), "--supersteps", "1", "--seed", "1", "--sanitize"]) == 0
    assert read_edge_list(out).m == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "g.txt"
    res = subprocess.run([sys.executable, "-m", "edgeswitch", "gen", "gnp", "--n", "6", "--p", "1",
                          "--seed", "0", "--out", str(out)], capture_output=True, text=True)
    assert res.returncode == 0 and read_edge_list(out).m == 15


def test_invariant_violation_exit_code(tmp_path, pld_file, monkeypatch):
    from edgeswitch import cli
    from edgeswitch.errors import InvariantViolation

    def broken(*args, **kwargs):
        raise InvariantViolation("no progress")

    monkeypatch.setattr(cli, "make_chain", broken)
    assert main(["randomize", str(pld_file), str(tmp_path / "o.txt"), "--seed", "1"]) == 3

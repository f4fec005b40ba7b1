import csv
import json

import pytest

from mppi.cli import EXIT_CYCLE, EXIT_INPUT, EXIT_MISMATCH, EXIT_OK, main
from mppi.game_model import read_game


@pytest.fixture
def example5(tmp_path):
    game_path = tmp_path / "ex5.zsg"
    trace_path = tmp_path / "ex5.json"
    assert main(["generate", "example5", "--out", str(game_path), "--trace-out", str(trace_path)]) == EXIT_OK
    return game_path, trace_path


def test_generate_is_deterministic(tmp_path, example5):
    again = tmp_path / "again.zsg"
    main(["generate", "example5", "--out", str(again)])
    assert again.read_bytes() == example5[0].read_bytes()
    trace = json.loads(example5[1].read_text())
    assert trace["sigma0"] == [1, 1, 3, 3, 1]
    assert len(trace["biases"]) == 2


def test_solve_json(example5, capsys):
    assert main(["solve", "--input", str(example5[0]), "--json", "--sigma0", "1,1,3,3,1"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["eta"] == pytest.approx([0.0] * 5, abs=1e-12)
    assert data["strongly_degenerate"] == 1
    assert data["converged"] and not data["cycle"]
    assert data["sigma"][4] == 3


def test_solve_text_report(example5, capsys):
    assert main(["solve", "--input", str(example5[0])]) == EXIT_OK
    out = capsys.readouterr().out
    assert "converged:            True" in out
    assert "sigma:" in out


def test_solve_naive_cycle_exit_code(example5, capsys):
    code = main(["solve", "--input", str(example5[0]), "--naive", "--strict-trace",
                 "--trace-biases", str(example5[1]), "--json"])
    assert code == EXIT_CYCLE
    data = json.loads(capsys.readouterr().out)
    assert data["cycle"]
    assert data["sigma"] == [1, 1, 3, 3, 1]


def test_solve_with_injected_biases(example5, capsys):
    code = main(["solve", "--input", str(example5[0]), "--strict-trace", "--check-invariants",
                 "--trace-biases", str(example5[1]), "--json"])
    assert code == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["v"] == pytest.approx([0.0, 0.0, -0.5, -0.5, -0.5], abs=1e-12)


@pytest.mark.parametrize("text", ["zsg 1 1\n0 0 0 0 1:1\n", "not a game\n"])
def test_solve_malformed_input(tmp_path, text):
    path = tmp_path / "bad.zsg"
    path.write_text(text)
    assert main(["solve", "--input", str(path)]) == EXIT_INPUT


def test_solve_missing_file(tmp_path):
    assert main(["solve", "--input", str(tmp_path / "missing.zsg")]) == EXIT_INPUT


def test_fields_out(example5, tmp_path, capsys):
    fields = tmp_path / "fields.txt"
    assert main(["solve", "--input", str(example5[0]), "--fields-out", str(fields), "--dt", "0.5"]) == EXIT_OK
    lines = fields.read_text().splitlines()
    assert len(lines) == 5
    first = lines[0].split()
    assert first[0] == "0" and first[1] == "nan"
    assert len(first) == 7


def test_generate_richman(tmp_path):
    path = tmp_path / "r.zsg"
    assert main(["generate", "richman", "--nodes", "30", "--degree", "4", "--seed", "2", "--out", str(path)]) == EXIT_OK
    game = read_game(path)
    assert game.n == 30
    assert game.min_counts.tolist() == [4] * 30


def test_generate_catmouse(tmp_path, capsys):
    path = tmp_path / "cm.zsg"
    assert main(["generate", "catmouse", "--grid", "5", "--speed", "1", "--out", str(path)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("dt ")
    assert read_game(path).n == 25
    assert len((tmp_path / "cm.zsg.coords").read_text().splitlines()) == 25


def test_bench_csv(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("MPPI_THREADS", raising=False)
    out = tmp_path / "bench.csv"
    code = main(["bench", "--sizes", "5,10,20", "--seeds", "2", "--degree", "3",
                 "--threads", "1", "--out", str(out), "--summary"])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 7
    rows = list(csv.DictReader(lines))
    assert [int(r["size"]) for r in rows] == [5, 5, 10, 10, 20, 20]
    assert all(float(r["residual"]) <= 1e-12 for r in rows)
    assert "strongly degenerate iterations -> tests" in capsys.readouterr().out


def test_oracle_check_passes(capsys):
    code = main(["oracle-check", "--count", "3", "--seed", "4", "--vi-iterations", "2000", "--vi-tol", "0.1"])
    assert code == EXIT_OK
    assert "oracle-check: 3/3 passed" in capsys.readouterr().out


def test_oracle_check_detects_wrong_eta(capsys):
    code = main(["oracle-check", "--count", "1", "--vi-iterations", "200", "--inject-wrong-eta"])
    assert code == EXIT_MISMATCH
    assert "0/1 passed" in capsys.readouterr().out


def test_unknown_command_exits():
    with pytest.raises(SystemExit):
        main(["frobnicate"])

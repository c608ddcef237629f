import json
import os
import stat
import subprocess
import sys

import pytest

from qubof.cli import main
from qubof.core import save_matrix


@pytest.fixture
def matrix_file(tmp_path, example_q):
    path = tmp_path / "q.json"
    save_matrix(example_q, path)
    return path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestSolve:
    def test_worked_example(self, matrix_file, tmp_path, capsys):
        out_file = tmp_path / "sol.json"
        code, out, _ = run(["solve", "--matrix", matrix_file, "-r", 10, "-k", 4, "-t", 200, "--seed", 3, "--out", out_file], capsys)
        assert code == 0
        result = json.loads(out_file.read_text())
        assert result == {"bits": [0, 1, 1, 0], "value": -24.0}
        assert json.loads(out) == result

    def test_byte_identical(self, matrix_file, tmp_path, capsys):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for p in paths:
            run(["solve", "--matrix", matrix_file, "--seed", 9, "--decoys", 2, "--out", p], capsys)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_env_seed(self, matrix_file, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("QUBOF_SEED", "41")
        _, env_out, _ = run(["solve", "--matrix", matrix_file, "-k", 2, "-t", 5], capsys)
        monkeypatch.delenv("QUBOF_SEED")
        _, flag_out, _ = run(["solve", "--matrix", matrix_file, "-k", 2, "-t", 5, "--seed", 41], capsys)
        assert env_out == flag_out

    def test_reference(self, matrix_file, capsys):
        _, out, _ = run(["solve", "--matrix", matrix_file, "--seed", 1, "--reference"], capsys)
        assert json.loads(out)["acc_vs"]["reference"] == -24.0

    def test_endpoint(self, matrix_file, server, capsys):
        args = ["solve", "--matrix", matrix_file, "--seed", 2, "-r", 10, "-k", 4]
        _, remote, _ = run(args + ["--endpoint", server.endpoint], capsys)
        _, local, _ = run(args, capsys)
        assert remote == local

    def test_offline_two_step(self, matrix_file, tmp_path, capsys):
        box = tmp_path / "box"
        args = ["solve", "--matrix", matrix_file, "--seed", 4, "--offline", box]
        _, out, _ = run(args, capsys)
        assert json.loads(out)["status"] == "request_written"
        assert run(["serve", "--offline", box], capsys)[0] == 0
        _, out, _ = run(args, capsys)
        _, direct, _ = run(args[:-2], capsys)
        assert out == direct


class TestObfuscateRecover:
    def test_split_flow_matches_solve(self, matrix_file, tmp_path, capsys):
        d = tmp_path / "o"
        code, out, _ = run(["obfuscate", "--matrix", matrix_file, "--seed", 5, "-k", 3, "--decoys", 1, "--out", d], capsys)
        assert code == 0 and json.loads(out)["matrices"] == 4
        assert stat.S_IMODE(os.stat(d / "secret.json").st_mode) == 0o600
        transmit = json.loads((d / "transmit.json").read_text())
        assert set(transmit) == {"radix", "matrices"}

        assert run(["serve", "--offline", d], capsys)[0] == 0
        sol = tmp_path / "sol.json"
        code, out, _ = run(
            ["recover", "--vectors", d / "response.json", "--secret", d / "secret.json",
             "--matrix", matrix_file, "--seed", 5, "--out", sol], capsys,
        )
        assert code == 0
        _, solved, _ = run(["solve", "--matrix", matrix_file, "--seed", 5, "-k", 3, "--decoys", 1], capsys)
        assert json.loads(out) == json.loads(solved)

    def test_secret_mismatch(self, matrix_file, tmp_path, capsys):
        d = tmp_path / "o"
        run(["obfuscate", "--matrix", matrix_file, "--seed", 5, "-k", 2, "--out", d], capsys)
        other = tmp_path / "other.json"
        save_matrix([[1.0, 2.0], [2.0, -1.0]], other)
        code, _, err = run(
            ["recover", "--vectors", tmp_path / "v.json", "--secret", d / "secret.json",
             "--matrix", other, "--out", tmp_path / "s.json"], capsys,
        )
        assert code == 1 and "error" in json.loads(err)


class TestOtherCommands:
    def test_privacy(self, matrix_file, tmp_path, capsys):
        code, out, _ = run(["privacy", "--matrix", matrix_file, "-k", 3, "--out", tmp_path / "p.json"], capsys)
        report = json.loads(out)
        assert code == 0 and report["alpha"] == 1 and report["alpha_exact"]
        assert len(report["digit_uniformity"]) == 3

    def test_bench(self, tmp_path, capsys):
        csv = tmp_path / "b.csv"
        code, out, _ = run(["bench", "--grid", "n=5", "k=2", "r=4", "t=10,20", "--trials", 2, "--seed", 0, "--out", csv], capsys)
        assert code == 0 and json.loads(out)["records"] == 4
        summary = json.loads((tmp_path / "b.summary.json").read_text())
        assert {row["t"] for row in summary} == {10, 20}

    def test_bench_missing_axis(self, tmp_path, capsys):
        code, _, err = run(["bench", "--grid", "n=5", "--out", tmp_path / "b.csv"], capsys)
        assert code == 1 and json.loads(err)["error"]


class TestErrors:
    def test_missing_file(self, tmp_path, capsys):
        code, out, err = run(["solve", "--matrix", tmp_path / "nope.json"], capsys)
        assert code == 1 and out == ""
        assert set(json.loads(err)) == {"error", "message"}

    def test_non_square(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"n": 2, "entries": [[1, 2]]}))
        code, _, err = run(["solve", "--matrix", bad], capsys)
        assert code == 1 and json.loads(err)["error"]

    def test_bad_radix(self, matrix_file, capsys):
        code, _, err = run(["solve", "--matrix", matrix_file, "-r", 1], capsys)
        assert code == 1 and json.loads(err)["error"]


def test_module_entry_point(matrix_file):
    proc = subprocess.run(
        [sys.executable, "-m", "qubof", "solve", "--matrix", str(matrix_file), "--seed", "1"],
        capture_output=True, text=True, check=True,
    )
    assert json.loads(proc.stdout)["bits"] == [0, 1, 1, 0]

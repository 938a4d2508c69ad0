import json
import subprocess
import sys

import numpy as np
import pytest

from tiara import read_mtx, read_tsv
from tiara.cli import main, synthetic_sequence


@pytest.fixture
def toy_input(tmp_path):
    path = tmp_path / "edges.txt"
    path.write_text("# toy\na b 100\nb c 150\nc a 250\n")
    return str(path)


def manifest_of(outdir):
    with open(outdir / "manifest.json") as fh:
        return json.load(fh)


class TestAugment:
    def test_writes_files_and_manifest(self, toy_input, tmp_path):
        out = tmp_path / "out"
        rc = main(["augment", "--input", toy_input, "--output-dir", str(out),
                   "--time-aggregation", "100", "--iterations", "20"])
        assert rc == 0
        manifest = manifest_of(out)
        assert manifest["input"]["steps"] == 2
        assert len(manifest["per_step"]) == 2
        files = sorted(p.name for p in out.glob("x_*.mtx"))
        assert files == ["x_0001.mtx", "x_0002.mtx"]

    def test_manifest_nnz_matches_files(self, toy_input, tmp_path):
        out = tmp_path / "out"
        main(["augment", "--input", toy_input, "--output-dir", str(out),
              "--time-aggregation", "100", "--iterations", "10"])
        manifest = manifest_of(out)
        total = 0
        for rec in manifest["per_step"]:
            m = read_mtx(out / f"x_{rec['t']:04d}.mtx")
            assert m.nnz == rec["output_nnz"]
            total += m.nnz
        assert manifest["total_nnz"] == total

    def test_rerun_is_byte_identical(self, toy_input, tmp_path):
        args = ["augment", "--input", toy_input, "--time-aggregation", "100",
                "--iterations", "15", "--epsilon", "0.001"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--output-dir", str(a)]) == 0
        assert main(args + ["--output-dir", str(b)]) == 0
        for name in ("x_0001.mtx", "x_0002.mtx"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        ma, mb = manifest_of(a), manifest_of(b)
        for m in (ma, mb):
            m.pop("total_wall_ms")
            for rec in m["per_step"]:
                rec.pop("wall_ms")
            m["config"].pop("output_dir")
        assert ma == mb

    def test_tsv_format(self, toy_input, tmp_path):
        out = tmp_path / "out"
        main(["augment", "--input", toy_input, "--output-dir", str(out),
              "--time-aggregation", "100", "--format", "tsv",
              "--iterations", "5"])
        m = read_tsv(out / "x_0001.tsv")
        assert m.shape == (3, 3)

    def test_default_output_is_row_stochastic(self, toy_input, tmp_path):
        out = tmp_path / "out"
        main(["augment", "--input", toy_input, "--output-dir", str(out),
              "--time-aggregation", "100", "--iterations", "20",
              "--epsilon", "0"])
        m = read_mtx(out / "x_0001.mtx")
        sums = m.row_sums()
        assert np.abs(sums[sums > 0] - 1.0).max() <= 1e-9

    def test_no_transpose_is_column_stochastic(self, toy_input, tmp_path):
        out = tmp_path / "out"
        main(["augment", "--input", toy_input, "--output-dir", str(out),
              "--time-aggregation", "100", "--iterations", "20",
              "--epsilon", "0", "--no-transpose"])
        m = read_mtx(out / "x_0001.mtx")
        sums = m.col_sums()
        assert np.abs(sums[sums > 0] - 1.0).max() <= 1e-9

    def test_symmetric_trick_output(self, toy_input, tmp_path):
        out = tmp_path / "out"
        main(["augment", "--input", toy_input, "--output-dir", str(out),
              "--time-aggregation", "100", "--iterations", "10",
              "--symmetric-trick"])
        d = read_mtx(out / "x_0001.mtx").to_dense()
        assert np.array_equal(d, d.T)

    def test_invalid_config_is_usage_error(self, toy_input, tmp_path, capsys):
        rc = main(["augment", "--input", toy_input,
                   "--output-dir", str(tmp_path / "x"),
                   "--alpha", "0.6", "--beta", "0.6"])
        assert rc == 2
        assert "alpha + beta" in capsys.readouterr().err

    def test_missing_input_is_io_error(self, tmp_path):
        rc = main(["augment", "--input", str(tmp_path / "nope.txt"),
                   "--output-dir", str(tmp_path / "out")])
        assert rc == 3


class TestVerify:
    def test_default_suite_passes(self, capsys):
        rc = main(["verify", "--nodes", "24", "--steps", "3", "--trials", "3",
                   "--walks", "50000", "--iterations", "40"])
        out = capsys.readouterr().out
        assert rc == 0
        assert out.count("[PASS]") == 7
        assert "[FAIL]" not in out

    def test_single_check(self, capsys):
        rc = main(["verify", "--check", "power-bound", "--alpha", "0.25",
                   "--beta", "0.25", "--iterations", "10", "--nodes", "30"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "K=10" in out

    def test_injected_fault_detected(self, capsys, monkeypatch):
        monkeypatch.setenv("TIARA_FAULT_ITERATIONS", "3")
        rc = main(["verify", "--check", "power-bound", "--nodes", "30",
                   "--iterations", "100"])
        assert rc == 1
        assert "[FAIL]" in capsys.readouterr().out

    def test_size_guard(self, capsys):
        assert main(["verify", "--nodes", "1000"]) == 2


class TestStats:
    def test_single_edge_toy(self, tmp_path, capsys):
        path = tmp_path / "one.txt"
        path.write_text("u v 5\n")
        rc = main(["stats", "--input", str(path)])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].split("\t") == ["n", "m", "T", "L", "avg_n_t", "C_t"]
        assert lines[1].split("\t") == ["2", "1", "1", "-", "2", "0.50"]

    def test_empty_input_is_clean_error(self, tmp_path, capsys):
        path = tmp_path / "empty.txt"
        path.write_text("# nothing here\n")
        rc = main(["stats", "--input", str(path)])
        assert rc == 3
        assert "empty" in capsys.readouterr().err


class TestBench:
    def test_synthetic_run(self, tmp_path, capsys):
        manifest = tmp_path / "bench.json"
        rc = main(["bench", "--nodes", "40", "--active", "8", "--steps", "3",
                   "--iterations", "5", "--manifest", str(manifest)])
        assert rc == 0
        with open(manifest) as fh:
            data = json.load(fh)
        assert len(data["per_step"]) == 3
        assert all(rec["wall_ms"] >= 0 for rec in data["per_step"])
        assert "peak output nnz" in capsys.readouterr().out

    def test_synthetic_sequence_controls_activation(self):
        seq = synthetic_sequence(50, 12, 4, avg_degree=2.0, seed=3)
        assert seq.T == 4 and seq.n == 50
        for act in seq.activated:
            assert len(act) == 12

    def test_deterministic_given_seed(self):
        a = synthetic_sequence(30, 6, 3, seed=9)
        b = synthetic_sequence(30, 6, 3, seed=9)
        for x, y in zip(a.snapshots, b.snapshots):
            assert x == y


class TestEntryPoint:
    def test_module_invocation(self):
        proc = subprocess.run([sys.executable, "-m", "tiara.cli", "--version"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.strip() == "0.1.0"

    def test_usage_error_exit_code(self):
        proc = subprocess.run([sys.executable, "-m", "tiara.cli", "nonsense"],
                              capture_output=True, text=True)
        assert proc.returncode == 2


class TestVerifyDeterminism:
    def test_same_flags_same_output(self, capsys):
        args = ["verify", "--check", "stochastic", "--trials", "3",
                "--nodes", "20", "--seed", "5"]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        assert capsys.readouterr().out == first


class TestBenchFromFile:
    def test_file_driven_bench(self, toy_input, tmp_path, capsys):
        manifest = tmp_path / "bench.json"
        rc = main(["bench", "--input", toy_input, "--time-aggregation", "100",
                   "--iterations", "5", "--manifest", str(manifest)])
        assert rc == 0
        with open(manifest) as fh:
            data = json.load(fh)
        assert data["input"]["nodes"] == 3
        assert len(data["per_step"]) == 2

import csv
import json
import subprocess
import sys

import pytest

from blackbox_ranking.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestVerify:
    def test_single_suite(self, capsys):
        assert main(["verify", "--suite", "prop1", "--trials", "50"]) == EXIT_OK
        err = capsys.readouterr().err
        assert "PASS prop1" in err and "rank" not in err.replace("prop1", "")

    def test_json_report(self, tmp_path):
        out = tmp_path / "v.json"
        assert main(["verify", "--suite", "ap,margin", "--trials", "20", "--format", "json", "--out", str(out)]) == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["passed"] is True
        assert [r["suite"] for r in doc["rows"]] == ["ap", "margin"]

    def test_failure_exit_code(self, monkeypatch):
        import blackbox_ranking.verification as verification

        monkeypatch.setitem(verification.SUITES, "prop1", (lambda rng, n: (1, 0.5), 1))
        assert main(["verify", "--suite", "prop1"]) == EXIT_FAILED

    def test_unknown_suite(self):
        assert main(["verify", "--suite", "nope"]) == EXIT_USAGE


class TestConfigFile:
    def test_flags_override_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# bias run\nbatch-sizes = 4, 8\ntrials = 3\nseed = 1\n")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["bias", "--config", str(cfg), "--out", str(a)]) == EXIT_OK
        assert main(["bias", "--config", str(cfg), "--trials", "4", "--out", str(b)]) == EXIT_OK
        rows = read_csv(a)
        assert [r[0] for r in rows[2:]] == ["4", "8"]
        assert read_csv(a) != read_csv(b)

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("bogus = 1\n")
        assert main(["train", "--config", str(cfg)]) == EXIT_USAGE
        assert "unknown key 'bogus'" in capsys.readouterr().err

    def test_malformed_line(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("steps 10\n")
        assert main(["train", "--config", str(cfg)]) == EXIT_USAGE

    def test_missing_file(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "none.cfg")]) == EXIT_USAGE

    def test_bad_flag_value(self):
        assert main(["train", "--steps", "abc"]) == EXIT_USAGE


class TestOutputs:
    def test_bias_csv(self, tmp_path):
        out = tmp_path / "bias.csv"
        assert main(["bias", "--trials", "5", "--batch-sizes", "4,1000", "--out", str(out)]) == EXIT_OK
        rows = read_csv(out)
        assert rows[0][0] == "dataset_map"
        assert rows[1] == ["batch_size", "mean_map", "std_map"]
        assert float(rows[3][1]) == float(rows[0][1])

    def test_bias_json(self, tmp_path):
        out = tmp_path / "bias.json"
        assert main(["bias", "--trials", "5", "--batch-sizes", "8", "--format", "json", "--out", str(out)]) == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["rows"][0]["mean_map"] >= doc["dataset_map"]

    def test_bias_rejects_oversized_batch(self):
        assert main(["bias", "--items", "50", "--batch-sizes", "60"]) == EXIT_USAGE

    def test_landscape_files_are_seeded(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert main(["landscape", "--grid", "5", "--lambdas", "0.01,0.5", "--seed", "3", "--out", str(d)]) == EXIT_OK
        names = sorted(p.name for p in a.iterdir())
        assert names == ["landscape_lambda_0.01.csv", "landscape_lambda_0.5.csv"]
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes()
        rows = read_csv(a / names[0])
        assert rows[0] == ["u", "v", "true_loss", "surrogate_loss"] and len(rows) == 26

    def test_bench_csv(self, tmp_path):
        out = tmp_path / "bench.csv"
        assert main(["bench", "--lengths", "1000", "--repeats", "1", "--out", str(out)]) == EXIT_OK
        rows = read_csv(out)
        assert rows[0] == ["length", "median_ms", "p10_ms", "p90_ms", "alpha"]
        assert len(rows) == 3

    def test_train_history(self, tmp_path, capsys):
        out = tmp_path / "h.csv"
        args = ["train", "--steps", "20", "--eval-every", "10", "--classes", "6", "--per-class", "12",
                "--batch-size", "16", "--memory", "1", "--out", str(out)]
        assert main(args) == EXIT_OK
        rows = read_csv(out)
        assert rows[0] == ["step", "loss", "r_at_1", "r_at_4", "map"]
        assert [r[0] for r in rows[1:]] == ["0", "10", "20"]
        err = capsys.readouterr().err
        assert "final step 20" in err and "best" in err
        second = tmp_path / "h2.csv"
        assert main(args[:-1] + [str(second)]) == EXIT_OK
        assert out.read_bytes() == second.read_bytes()

    def test_train_invalid_config(self):
        assert main(["train", "--batch-size", "10", "--samples-per-class", "4"]) == EXIT_USAGE

    def test_train_unknown_loss(self):
        assert main(["train", "--loss", "hinge"]) == EXIT_USAGE


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "blackbox_ranking", "verify", "--suite", "margin", "--trials", "10"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "PASS margin" in proc.stderr


def test_missing_command():
    assert main([]) == EXIT_USAGE

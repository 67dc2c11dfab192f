"""Command-line harness: reproducibility of output trees, config-file
precedence, and the generate/replay/report pipeline."""

import pytest

from dca.cli import main
from dca.datasets import synthetic_items, write_items


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    if capsys is not None:
        return code, capsys.readouterr()
    return code


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestBc:
    def test_equal_seeds_give_byte_identical_trees(self, tmp_path):
        argv = ["--seed", "3", "bc", "--repeats", "2"]
        assert run(["--out", tmp_path / "a"] + argv) == 0
        assert run(["--out", tmp_path / "b"] + argv) == 0
        a, b = tree_bytes(tmp_path / "a"), tree_bytes(tmp_path / "b")
        assert a == b
        assert set(a) == {"manifest.txt", "summary.txt", "verdicts.txt",
                          "verdicts.tsv", "migration.log"}

    def test_different_seeds_differ(self, tmp_path):
        assert run(["--seed", "3", "--out", tmp_path / "a",
                    "bc", "--repeats", "2"]) == 0
        assert run(["--seed", "4", "--out", tmp_path / "b",
                    "bc", "--repeats", "2"]) == 0
        assert (tree_bytes(tmp_path / "a")["migration.log"]
                != tree_bytes(tmp_path / "b")["migration.log"])

    def test_sweep_writes_one_line_per_setting(self, tmp_path, capsys):
        code, captured = run(["--out", tmp_path, "bc", "--repeats", "1",
                              "--sweep-migration", "5,15"], capsys)
        assert code == 0
        summary = (tmp_path / "summary.txt").read_text()
        assert "migration-threshold 5:" in summary
        assert "migration-threshold 15:" in summary
        assert summary.strip() in captured.out.strip()

    def test_unknown_sweep_setting_fails(self, tmp_path, capsys):
        code, captured = run(["--out", tmp_path, "bc",
                              "--sweep-migration", "7"], capsys)
        assert code == 1
        assert "unknown sweep setting" in captured.err

    def test_dataset_file_round_trip(self, tmp_path):
        data = tmp_path / "items.csv"
        with open(data, "w") as fh:
            write_items(synthetic_items(), fh)
        assert run(["--out", tmp_path / "out", "bc", "--repeats", "1",
                    "--dataset", data]) == 0

    def test_missing_dataset_fails_cleanly(self, tmp_path, capsys):
        code, captured = run(["--out", tmp_path, "bc",
                              "--dataset", tmp_path / "nope.csv"], capsys)
        assert code == 1
        assert "cannot read dataset" in captured.err


class TestConfigFile:
    def test_config_sets_subcommand_options(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# experiment settings\nseed = 5\norder = two-step\n"
                       "repeats = 1\n")
        code, captured = run(["--config", cfg, "--out", tmp_path / "out",
                              "bc"], capsys)
        assert code == 0
        assert "order=two-step repeats=1" in captured.out
        manifest = (tmp_path / "out" / "manifest.txt").read_text()
        assert "seed = 5" in manifest

    def test_explicit_flags_beat_config(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("order = two-step\nrepeats = 1\n")
        code, captured = run(["--config", cfg, "--out", tmp_path / "out",
                              "bc", "--order", "random"], capsys)
        assert code == 0
        assert "order=random" in captured.out

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("velocity = 9\n")
        code, captured = run(["--config", cfg, "--out", tmp_path / "out",
                              "bc"], capsys)
        assert code == 1
        assert "unknown config keys: velocity" in captured.err

    def test_malformed_line_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("just words\n")
        code, captured = run(["--config", cfg, "--out", tmp_path / "out",
                              "bc"], capsys)
        assert code == 1
        assert "expected 'key = value'" in captured.err


class TestPortscan:
    def test_single_experiment_outputs(self, tmp_path):
        assert run(["--out", tmp_path, "portscan", "--experiment", "2",
                    "--repeats", "2"]) == 0
        assert (tmp_path / "exp2_processes.txt").exists()
        assert (tmp_path / "exp2_processes.tsv").exists()
        assert "experiment 2:" in (tmp_path / "summary.txt").read_text()

    def test_invalid_experiment_number(self, tmp_path, capsys):
        code, captured = run(["--out", tmp_path, "portscan",
                              "--experiment", "9"], capsys)
        assert code == 1
        assert "invalid experiment" in captured.err


class TestPipeline:
    def test_generate_replay_report_chain(self, tmp_path, capsys):
        log = tmp_path / "scenario.log"
        assert run(["--seed", "2", "--out", tmp_path / "g",
                    "generate", "--log", log]) == 0
        assert run(["--seed", "2", "--out", tmp_path / "r",
                    "replay", "--log", log]) == 0
        migration = tmp_path / "r" / "migration.log"
        assert migration.exists()
        code, captured = run(["--out", tmp_path / "p", "report",
                              "--log", migration], capsys)
        assert code == 0
        assert "records=" in captured.out
        assert (tmp_path / "p" / "verdicts.tsv").exists()

    def test_replay_missing_log_exits_one(self, tmp_path, capsys):
        code, captured = run(["--out", tmp_path, "replay",
                              "--log", tmp_path / "absent.log"], capsys)
        assert code == 1
        assert "cannot read log" in captured.err

    def test_replay_malformed_log_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.log"
        bad.write_text("garbage\n")
        code, captured = run(["--out", tmp_path, "replay", "--log", bad],
                             capsys)
        assert code == 1
        assert "malformed log" in captured.err

    def test_bad_endpoint_rejected(self, tmp_path, capsys):
        log = tmp_path / "s.log"
        assert run(["--out", tmp_path / "g", "generate", "--log", log]) == 0
        code, captured = run(["--out", tmp_path, "replay", "--log", log,
                              "--endpoint", "nowhere"], capsys)
        assert code == 1
        assert "invalid endpoint" in captured.err


class TestManifest:
    def test_manifest_lists_resolved_settings(self, tmp_path):
        assert run(["--seed", "8", "--out", tmp_path, "bc",
                    "--repeats", "1", "--order", "two-step"]) == 0
        manifest = (tmp_path / "manifest.txt").read_text()
        assert "seed = 8" in manifest
        assert "order = two-step" in manifest
        assert "command = bc" in manifest
        assert "out =" not in manifest

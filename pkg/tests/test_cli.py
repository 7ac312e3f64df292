import json

import numpy as np
import pytest

from doro import cli, data


def run_cli(args):
    return cli.main(args)


class TestTrainCommand:
    def test_synth_train_writes_records(self, tmp_path):
        out = tmp_path / "metrics.jsonl"
        code = run_cli([
            "train", "--synth-spec", "default", "--method", "cvar-doro",
            "--alpha", "0.2", "--eps", "0.01", "--epochs", "20",
            "--seed", "1", "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().splitlines()
        records = [json.loads(line) for line in lines]
        epochs = [r for r in records if "epoch" in r]
        summaries = [r for r in records if r.get("type") == "summary"]
        assert len(epochs) == 20
        assert len(summaries) == 1
        assert set(summaries[0]["selected_epoch"]) == {
            "oracle", "max-avg-acc", "min-cvar", "min-cvar-doro"
        }
        ckpts = sorted((tmp_path / "metrics_checkpoints").glob("*.npz"))
        assert len(ckpts) == 20

    def test_eps_requires_doro_method(self, tmp_path, capsys):
        code = run_cli([
            "train", "--synth-spec", "default", "--method", "cvar",
            "--eps", "0.1", "--epochs", "2", "--out", str(tmp_path / "m.jsonl"),
        ])
        assert code == 2
        assert "eps requires a doro method" in capsys.readouterr().err

    def test_rerun_byte_identical(self, tmp_path):
        args = [
            "train", "--synth-spec", "default", "--method", "chi2-dro",
            "--alpha", "0.3", "--epochs", "3", "--seed", "5",
        ]
        out_a = tmp_path / "a.jsonl"
        out_b = tmp_path / "b.jsonl"
        assert run_cli(args + ["--out", str(out_a)]) == 0
        assert run_cli(args + ["--out", str(out_b)]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_sweep_fans_out(self, tmp_path):
        out = tmp_path / "sweep.jsonl"
        code = run_cli([
            "train", "--synth-spec", "default", "--method", "cvar-doro",
            "--alpha", "0.2,0.4", "--eps", "0,0.01", "--epochs", "2",
            "--out", str(out),
        ])
        assert code == 0
        produced = {p.name for p in tmp_path.glob("sweep_alpha*.jsonl")}
        assert produced == {
            "sweep_alpha0.2_eps0.jsonl", "sweep_alpha0.2_eps0.01.jsonl",
            "sweep_alpha0.4_eps0.jsonl", "sweep_alpha0.4_eps0.01.jsonl",
        }

    def test_missing_data_flags(self, tmp_path, capsys):
        code = run_cli([
            "train", "--method", "erm", "--epochs", "1",
            "--out", str(tmp_path / "m.jsonl"),
        ])
        assert code == 2

    def test_out_dir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path))
        code = run_cli([
            "train", "--synth-spec", "default", "--method", "erm",
            "--epochs", "1", "--out", "metrics.jsonl",
        ])
        assert code == 0
        assert (tmp_path / "metrics.jsonl").exists()


class TestEvalCommand:
    def test_eval_checkpoint(self, tmp_path, capsys):
        out = tmp_path / "m.jsonl"
        assert run_cli([
            "train", "--synth-spec", "default", "--method", "erm",
            "--epochs", "2", "--out", str(out),
        ]) == 0
        ckpt = tmp_path / "m_checkpoints" / "epoch0001.npz"
        code = run_cli([
            "eval", "--synth-spec", "default", "--checkpoint", str(ckpt),
        ])
        assert code == 0
        record = json.loads(capsys.readouterr().out)
        assert 0.0 <= record["worst_accuracy"] <= record["avg_accuracy"] <= 1.0


class TestVerifyCommand:
    def test_verify_passes(self, capsys):
        code = run_cli(["verify", "--trials", "10"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.count("PASS") == 5
        assert "FAIL" not in out

    def test_corrupt_hook_fails_with_counterexample(self, capsys):
        code = run_cli(["verify", "--trials", "5", "--corrupt"])
        out = capsys.readouterr().out
        assert code == 1
        assert "FAIL" in out
        assert "counterexample" in out


class TestSynthCommand:
    def test_writes_csvs(self, tmp_path):
        code = run_cli([
            "synth", "--n", "50", "--outlier-fraction", "0.1",
            "--out-features", str(tmp_path / "f.csv"),
            "--out-domains", str(tmp_path / "d.csv"),
            "--out-metadata", str(tmp_path / "meta.json"),
        ])
        assert code == 0
        ds = data.load_csv(tmp_path / "f.csv", tmp_path / "d.csv")
        assert len(ds) == 50
        meta = data.load_metadata(tmp_path / "meta.json")
        assert len(meta["contaminated_indices"]) == 5


class TestTrimCommand:
    def test_trims_and_records_removed(self, tmp_path):
        assert run_cli([
            "synth", "--n", "40",
            "--out-features", str(tmp_path / "f.csv"),
            "--out-domains", str(tmp_path / "d.csv"),
        ]) == 0
        code = run_cli([
            "trim", "--data", str(tmp_path / "f.csv"),
            "--domains", str(tmp_path / "d.csv"),
            "--rounds", "2", "--drop", "3", "--epochs", "2",
            "--out-features", str(tmp_path / "ft.csv"),
            "--out-domains", str(tmp_path / "dt.csv"),
            "--removed-out", str(tmp_path / "removed.json"),
        ])
        assert code == 0
        trimmed = data.load_csv(tmp_path / "ft.csv", tmp_path / "dt.csv")
        assert len(trimmed) == 34
        removed = json.loads((tmp_path / "removed.json").read_text())
        assert len(removed["removed_indices"]) == 6
        assert len(set(removed["removed_indices"])) == 6

    def test_over_trim_exits_2(self, tmp_path, capsys):
        assert run_cli([
            "synth", "--n", "10",
            "--out-features", str(tmp_path / "f.csv"),
            "--out-domains", str(tmp_path / "d.csv"),
        ]) == 0
        code = run_cli([
            "trim", "--data", str(tmp_path / "f.csv"),
            "--domains", str(tmp_path / "d.csv"),
            "--rounds", "5", "--drop", "5", "--epochs", "1",
            "--out-features", str(tmp_path / "ft.csv"),
            "--out-domains", str(tmp_path / "dt.csv"),
            "--removed-out", str(tmp_path / "removed.json"),
        ])
        assert code == 2


class TestParser:
    def test_unknown_flag_rejected(self):
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args(["train", "--bogus"])

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args([])

"""End-to-end command-line tests, run in-process through cli.main."""

import json
from pathlib import Path

import numpy as np
import pytest

from qscale import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def campaign(tmp_path, capsys, monkeypatch):
    """A small distorted campaign prepared into dataset.csv."""
    monkeypatch.delenv("QSCALE_SEED", raising=False)
    out = tmp_path / "camp"
    profile = tmp_path / "profile.json"
    profile.write_text(
        json.dumps({"gain": 1.3, "offset": 3.0, "humidity_coeff": 0.05, "noise_std": 1.0})
    )
    code = cli.main(
        [
            "synth",
            "--seed", "11",
            "--hours", "60",
            "--profile", str(profile),
            "--out", str(out),
        ]
    )
    capsys.readouterr()
    assert code == 0
    return out / "dataset.csv"


class TestUsage:
    def test_no_command_is_usage_error(self, capsys):
        code, _, _ = run(capsys, *[])
        assert code == 2

    def test_unknown_command(self, capsys):
        code, _, _ = run(capsys, "calibrate")
        assert code == 2

    def test_missing_required_flag(self, capsys):
        code, _, _ = run(capsys, "train", "--model", "ffnn")
        assert code == 2

    def test_unknown_flag(self, capsys):
        code, _, _ = run(capsys, "benchmark", "--data", "x.csv", "--bogus")
        assert code == 2

    @pytest.mark.parametrize(
        "command",
        [
            None, "prepare", "synth", "train", "predict",
            "cross-validate", "benchmark", "grid-search", "report",
        ],
    )
    def test_help_exits_zero(self, capsys, command):
        argv = ["--help"] if command is None else [command, "--help"]
        code, out, _ = run(capsys, *argv)
        assert code == 0
        assert "usage" in out.lower()

    def test_version(self, capsys):
        code, out, _ = run(capsys, "--version")
        assert code == 0
        assert "qscale" in out


class TestSynthAndPrepare:
    def test_synth_writes_campaign_and_dataset(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("QSCALE_SEED", raising=False)
        out = tmp_path / "synthdir"
        code, _, err = run(
            capsys, "synth", "--seed", "5", "--hours", "48", "--out", str(out)
        )
        assert code == 0
        for name in ("sensors.csv", "reference.csv", "dataset.csv", "manifest.json"):
            assert (out / name).exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert manifest["seed"] == 5
        assert "wall_time_s" in manifest
        assert manifest["versions"]["qscale"]

    def test_synth_dataset_runs_through_prepare(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("QSCALE_SEED", raising=False)
        synth_dir = tmp_path / "raw"
        code, _, _ = run(
            capsys, "synth", "--seed", "2", "--hours", "48", "--out", str(synth_dir)
        )
        assert code == 0
        prep_dir = tmp_path / "prep"
        code, _, _ = run(
            capsys,
            "prepare",
            "--sensors", str(synth_dir / "sensors.csv"),
            "--reference", str(synth_dir / "reference.csv"),
            "--out", str(prep_dir),
        )
        assert code == 0
        direct = (synth_dir / "dataset.csv").read_bytes()
        via_prepare = (prep_dir / "dataset.csv").read_bytes()
        assert direct == via_prepare

    def test_seed_from_environment(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("QSCALE_SEED", "123")
        out = tmp_path / "envseed"
        code, _, _ = run(capsys, "synth", "--hours", "48", "--out", str(out))
        assert code == 0
        assert json.loads((out / "manifest.json").read_text())["seed"] == 123

    def test_bad_environment_seed(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("QSCALE_SEED", "twelve")
        code, _, err = run(
            capsys, "synth", "--hours", "48", "--out", str(tmp_path / "x")
        )
        assert code == 1
        assert "config error" in err

    def test_bad_profile_field(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("QSCALE_SEED", raising=False)
        profile = tmp_path / "p.json"
        profile.write_text(json.dumps({"gian": 1.5}))
        code, _, err = run(
            capsys,
            "synth", "--hours", "48", "--profile", str(profile),
            "--out", str(tmp_path / "y"),
        )
        assert code == 1
        assert "config error" in err


class TestTrainPredict:
    def test_train_smoke(self, tmp_path, capsys, campaign):
        out = tmp_path / "run"
        code, stdout, _ = run(
            capsys,
            "train",
            "--model", "ffnn",
            "--data", str(campaign),
            "--epochs", "3",
            "--learning-rate", "0.01",
            "--seed", "1",
            "--out", str(out),
        )
        assert code == 0
        for name in ("model.json", "report.json", "series.csv", "manifest.json"):
            assert (out / name).exists()
        losses = json.loads(stdout)
        assert set(losses) == {"l1", "mse", "rmse"}
        report = json.loads((out / "report.json").read_text())
        assert report["model_kind"] == "ffnn"
        assert report["test_losses"]["l1"] == losses["l1"]
        assert len(report["train_history"]) == 3

    def test_train_missing_dataset(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("QSCALE_SEED", raising=False)
        code, _, err = run(
            capsys,
            "train",
            "--model", "ffnn",
            "--data", str(tmp_path / "nope.csv"),
            "--out", str(tmp_path / "out"),
        )
        assert code == 1
        assert "data error" in err

    def test_config_file_with_flag_override(self, tmp_path, capsys, campaign):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "epochs": 1,
                    "learning_rate": 0.02,
                    "optimizer": "adam",
                    "loss": "mse",
                    "hidden_sizes": [4],
                    "features": ["pm25", "temp"],
                }
            )
        )
        out = tmp_path / "cfgrun"
        code, _, _ = run(
            capsys,
            "train",
            "--model", "ffnn",
            "--data", str(campaign),
            "--config", str(cfg),
            "--epochs", "4",
            "--seed", "0",
            "--out", str(out),
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["config"]["epochs"] == 4  # flag wins
        assert report["config"]["learning_rate"] == 0.02
        assert report["options"]["hidden_sizes"] == [4]
        assert report["options"]["features"] == ["pm25", "temp"]

    def test_predict_round_trip(self, tmp_path, capsys, campaign):
        train_dir = tmp_path / "trained"
        code, _, _ = run(
            capsys,
            "train",
            "--model", "ffnn",
            "--data", str(campaign),
            "--epochs", "2",
            "--seed", "3",
            "--out", str(train_dir),
        )
        assert code == 0
        pred_dir = tmp_path / "preds"
        code, _, _ = run(
            capsys,
            "predict",
            "--model-file", str(train_dir / "model.json"),
            "--data", str(campaign),
            "--out", str(pred_dir),
        )
        assert code == 0
        lines = (pred_dir / "predictions.csv").read_text().strip().split("\n")
        assert lines[0] == "timestamp,raw_pm25,calibrated_pm25,reference_pm25"
        assert len(lines) == 61  # header + one row per hour (window 1)

    def test_predict_missing_model(self, tmp_path, capsys, campaign):
        code, _, err = run(
            capsys,
            "predict",
            "--model-file", str(tmp_path / "ghost.json"),
            "--data", str(campaign),
            "--out", str(tmp_path / "o"),
        )
        assert code == 1
        assert "data error" in err

    def test_train_divergence_reports_numeric_error(self, tmp_path, capsys, campaign):
        with np.errstate(all="ignore"):
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                code, _, err = run(
                    capsys,
                    "train",
                    "--model", "ffnn",
                    "--data", str(campaign),
                    "--epochs", "40",
                    "--learning-rate", "1e15",
                    "--loss", "mse",
                    "--seed", "1",
                    "--out", str(tmp_path / "div"),
                )
        assert code == 1
        assert "numeric error" in err
        assert "diverged" in err


class TestBenchmark:
    def test_perfect_campaign_prints_zero(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("QSCALE_SEED", raising=False)
        out = tmp_path / "perfect"
        code, _, _ = run(
            capsys, "synth", "--seed", "7", "--hours", "48", "--out", str(out)
        )
        assert code == 0
        code, stdout, _ = run(
            capsys,
            "benchmark",
            "--data", str(out / "dataset.csv"),
            "--loss", "l1",
            "--draws", "20",
        )
        assert code == 0
        assert stdout.strip() == "0.0"

    def test_distorted_campaign_positive(self, tmp_path, capsys, campaign):
        code, stdout, _ = run(
            capsys, "benchmark", "--data", str(campaign), "--loss", "rmse",
            "--draws", "10", "--seed", "2",
        )
        assert code == 0
        assert float(stdout.strip()) > 1.0

    def test_benchmark_report_output(self, tmp_path, capsys, campaign):
        out = tmp_path / "benchout"
        code, _, _ = run(
            capsys,
            "benchmark",
            "--data", str(campaign),
            "--loss", "l1",
            "--sample-size", "15",
            "--draws", "30",
            "--seed", "4",
            "--out", str(out),
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["benchmark"]["sample_size"] == 15
        assert report["benchmark"]["n_draws"] == 30
        assert report["model_kind"] == "uncalibrated"


class TestCrossValidateCommand:
    def test_cross_validate_writes_report(self, tmp_path, capsys, campaign):
        out = tmp_path / "cv"
        code, stdout, _ = run(
            capsys,
            "cross-validate",
            "--model", "ffnn",
            "--data", str(campaign),
            "--epochs", "2",
            "--learning-rate", "0.02",
            "--optimizer", "adam",
            "--folds", "3",
            "--benchmark-draws", "40",
            "--seed", "9",
            "--threads", "2",
            "--out", str(out),
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["folds"]) == 3
        assert report["fold_spec"]["mode"] == "shuffled"
        assert report["benchmark"]["sample_size"] == 60 // 3
        averages = json.loads(stdout)
        assert averages == report["fold_average"]

    def test_default_protocol_folds(self, tmp_path, capsys, campaign):
        out = tmp_path / "cvdefault"
        code, _, _ = run(
            capsys,
            "cross-validate",
            "--model", "ffnn",
            "--data", str(campaign),
            "--epochs", "1",
            "--benchmark-draws", "0",
            "--seed", "0",
            "--out", str(out),
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["fold_spec"] == {"k": 4, "mode": "shuffled", "seed": 0}
        assert report["benchmark"] is None

    def test_rerun_is_byte_identical(self, tmp_path, capsys, campaign):
        argv = [
            "cross-validate",
            "--model", "ffnn",
            "--data", str(campaign),
            "--epochs", "2",
            "--learning-rate", "0.02",
            "--optimizer", "adam",
            "--folds", "3",
            "--benchmark-draws", "25",
            "--seed", "4",
        ]
        a, b = tmp_path / "runA", tmp_path / "runB"
        assert cli.main(argv + ["--out", str(a), "--threads", "1"]) == 0
        assert cli.main(argv + ["--out", str(b), "--threads", "4"]) == 0
        capsys.readouterr()
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
        assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()


class TestGridSearchCommand:
    def test_grid_search_ranks_and_persists(self, tmp_path, capsys, campaign):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"epochs": [0, 3]}))
        out = tmp_path / "gs"
        code, stdout, err = run(
            capsys,
            "grid-search",
            "--model", "ffnn",
            "--data", str(campaign),
            "--grid", str(grid),
            "--learning-rate", "0.02",
            "--optimizer", "adam",
            "--loss", "mse",
            "--seed", "6",
            "--threads", "2",
            "--out", str(out),
        )
        assert code == 0
        assert "2 configurations" in err
        payload = json.loads((out / "grid.json").read_text())
        assert payload["grid_size"] == 2
        assert len(payload["entries"]) == 2
        best = json.loads(stdout)
        assert best["params"]["epochs"] == 3

    def test_grid_axis_must_be_list(self, tmp_path, capsys, campaign):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"epochs": 3}))
        code, _, err = run(
            capsys,
            "grid-search",
            "--model", "ffnn",
            "--data", str(campaign),
            "--grid", str(grid),
            "--out", str(tmp_path / "gs2"),
        )
        assert code == 1
        assert "config error" in err


class TestReportCommand:
    def test_report_prints_summary(self, tmp_path, capsys, campaign):
        out = tmp_path / "cv"
        code, _, _ = run(
            capsys,
            "cross-validate",
            "--model", "ffnn",
            "--data", str(campaign),
            "--epochs", "1",
            "--folds", "3",
            "--benchmark-draws", "10",
            "--seed", "1",
            "--out", str(out),
        )
        assert code == 0
        code, stdout, _ = run(
            capsys, "report", "--report-file", str(out / "report.json")
        )
        assert code == 0
        assert "model: ffnn" in stdout
        assert "fold 0:" in stdout
        assert "fold average:" in stdout
        assert "benchmark (l1):" in stdout

    def test_report_missing_file(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "report", "--report-file", str(tmp_path / "none.json")
        )
        assert code == 1
        assert "data error" in err

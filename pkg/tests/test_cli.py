"""Command-line interface: exit codes, artifacts, and manifests."""
import json

import numpy as np
import pytest

from stochinput.autocorr import CorrelationSequence
from stochinput.cli import main


@pytest.fixture
def small_config(tmp_path):
    cfg = {
        "sample_count": 20_000,
        "filter_steps": 100,
        "seed": 3,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def reduce_config(tmp_path):
    cfg = {
        "sample_count": 5_000,
        "rom_order": 3,
        "markov_count": 200,
        "heat": {"grid_count": 12},
    }
    path = tmp_path / "reduce.json"
    path.write_text(json.dumps(cfg))
    return path


class TestExitCodes:
    def test_version_exits_cleanly(self, capsys):
        assert main(["--version"]) == 0

    def test_missing_subcommand_is_usage_error(self, capsys):
        assert main([]) == 2

    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["recover", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
        assert code == 2
        assert "not found" in capsys.readouterr().err

    def test_invalid_config_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["recover", "--config", str(bad), "--out", str(tmp_path)]) == 2

    def test_unknown_config_field(self, tmp_path, capsys):
        bad = tmp_path / "extra.json"
        bad.write_text(json.dumps({"grid": 50}))
        assert main(["recover", "--config", str(bad), "--out", str(tmp_path)]) == 2

    def test_reduce_requires_rom_order(self, small_config, tmp_path, capsys):
        code = main(["reduce", "--config", str(small_config), "--out", str(tmp_path)])
        assert code == 2
        assert "rom_order" in capsys.readouterr().err


class TestRecover:
    def test_artifacts_and_manifest(self, small_config, tmp_path):
        out = tmp_path / "out"
        assert main(["recover", "--config", str(small_config), "--out", str(out)]) == 0
        names = {
            "recovered_input_autocorr.csv",
            "true_input_autocorr.csv",
            "input_autocorr_relative_error.csv",
            "solver_diagnostics.json",
            "manifest.json",
        }
        assert names <= {p.name for p in out.iterdir()}
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "recover"
        assert manifest["seed"] == 3
        assert set(manifest["files"]) == names
        recovered = CorrelationSequence.read_csv(out / "recovered_input_autocorr.csv")
        truth = CorrelationSequence.read_csv(out / "true_input_autocorr.csv")
        assert recovered.N == truth.N == 40
        rel = np.linalg.norm(recovered[0] - truth[0]) / np.linalg.norm(truth[0])
        assert rel < 0.2
        diag = json.loads((out / "solver_diagnostics.json").read_text())
        assert diag["method"] == "direct"

    def test_method_override(self, small_config, tmp_path):
        out = tmp_path / "cg_out"
        code = main(
            ["recover", "--config", str(small_config), "--out", str(out), "--method", "cg"]
        )
        assert code == 0
        diag = json.loads((out / "solver_diagnostics.json").read_text())
        assert diag["method"] == "cg"
        assert diag["iterations"] >= 1


class TestFilter:
    def test_summary_contents(self, small_config, tmp_path):
        out = tmp_path / "filt"
        assert main(["filter", "--config", str(small_config), "--out", str(out)]) == 0
        summary = json.loads((out / "filter_summary.json").read_text())
        assert summary["armse_ar_based"] > 0.0
        assert summary["armse_assumed_model"] > 0.0
        assert len(summary["coverage_3sigma"]) == 50
        steps = (out / "filter_steps.csv").read_text().strip().splitlines()
        assert steps[0].startswith("step,component")
        assert len(steps) == 1 + 100 * 50

    def test_nsr_sweep_artifact(self, tmp_path):
        cfg = tmp_path / "sweep.json"
        cfg.write_text(json.dumps({"sample_count": 10_000, "filter_steps": 50}))
        out = tmp_path / "sweep_out"
        code = main(
            ["filter", "--config", str(cfg), "--out", str(out), "--sweep", "nsr"]
        )
        assert code == 0
        lines = (out / "nsr_sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "nsr,armse_ar_based,armse_assumed_model"
        assert len(lines) == 6


class TestReduce:
    def test_rom_artifacts(self, reduce_config, tmp_path):
        out = tmp_path / "rom"
        assert main(["reduce", "--config", str(reduce_config), "--out", str(out)]) == 0
        rom = json.loads((out / "rom.json").read_text())
        assert len(rom["singular_values"]) <= 3
        sv_lines = (out / "hankel_singular_values.csv").read_text().strip().splitlines()
        assert sv_lines[0] == "index,singular_value"
        err_lines = (out / "rom_markov_error.csv").read_text().strip().splitlines()
        assert err_lines[0] == "index,relative_error"


class TestPipeline:
    def test_end_to_end_artifacts(self, small_config, tmp_path):
        out = tmp_path / "pipe"
        assert main(["pipeline", "--config", str(small_config), "--out", str(out)]) == 0
        summary = json.loads((out / "pipeline_summary.json").read_text())
        assert summary["max_input_relative_error"] < 0.2
        assert summary["ar_order"] >= 1
        assert (out / "innovations_model.json").exists()
        assert (out / "ar_model.json").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert "solve-input-autocorr" in manifest["wall_times"]

"""Unit tests for CLI functionality."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from hirrr.estimators.base import ModelParams
from hirrr.main import cli, main


class TestEnvHelpCommand:
    """Test the env-help command functionality."""

    def test_env_help_all_categories(self):
        """Test env-help command displays all categories by default."""
        runner = CliRunner()
        result = runner.invoke(cli, ["env-help"])

        assert result.exit_code == 0
        assert "Environment Variable Documentation" in result.output
        assert "⚙️ Runtime Configuration" in result.output
        assert "📐 Estimation Defaults" in result.output
        assert "📝 Logging Configuration" in result.output
        assert "Configuration Notes" in result.output

    def test_env_help_runtime_category(self):
        """Test env-help command with runtime category filter."""
        runner = CliRunner()
        result = runner.invoke(cli, ["env-help", "--category", "runtime"])

        assert result.exit_code == 0
        assert "HIRRR_THREADS" in result.output
        assert "HIRRR_SEED" in result.output
        assert "📝 Logging Configuration" not in result.output

    def test_env_help_estimation_category(self):
        """Test env-help command with estimation category filter."""
        runner = CliRunner()
        result = runner.invoke(cli, ["env-help", "--category", "estimation"])

        assert result.exit_code == 0
        assert "HIRRR_MAX_ITERS" in result.output
        assert "HIRRR_TOLERANCE" in result.output
        assert "HIRRR_TRIM" in result.output

    def test_env_help_invalid_category(self):
        """Test env-help command with invalid category."""
        runner = CliRunner()
        result = runner.invoke(cli, ["env-help", "--category", "invalid"])

        # Click validates choices and exits with code 2 for invalid options
        assert result.exit_code == 2
        assert "Invalid value for '--category'" in result.output

    def test_env_help_skips_config_loading(self, monkeypatch):
        """Test env-help works even when the default env is broken."""
        monkeypatch.setenv("HIRRR_THREADS", "not-a-number")
        runner = CliRunner()
        result = runner.invoke(cli, ["env-help"])

        assert result.exit_code == 0


class TestVersionCommand:
    """Test the version command."""

    def test_version_output(self):
        """Test version shows name, version and estimators."""
        runner = CliRunner()
        result = runner.invoke(cli, ["version"])

        assert result.exit_code == 0
        assert "HiRRR" in result.output
        assert "Version:" in result.output
        assert "License: MIT" in result.output
        assert "glm, glm0, rrr, hirrr" in result.output


class TestMainExitCodes:
    """Exit codes of the console entry point."""

    def test_success_returns_zero(self):
        assert main(["version"]) == 0

    def test_usage_error_returns_one(self):
        assert main(["env-help", "--category", "bogus"]) == 1
        assert main(["no-such-command"]) == 1

    def test_missing_rank_is_usage_error(self, env_file, gaussian_dataset, tmp_path):
        data = tmp_path / "data.json"
        gaussian_dataset.save(data)
        code = main(["--env-file", str(env_file), "fit", "--data", str(data), "--model", "hirrr", "--out", str(tmp_path / "fit.json")])
        assert code == 1

    def test_bad_n1_grid_is_usage_error(self, env_file, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"n": 30, "n1": 10, "p": 4, "q": 3, "r": 1}))
        code = main(
            ["--env-file", str(env_file), "simulate", "--spec", str(spec), "--reps", "1", "--out", str(tmp_path / "sim"), "--n1-grid", "a,b"]
        )
        assert code == 1

    def test_data_error_returns_two(self, env_file, tmp_path, capsys):
        data = tmp_path / "data.json"
        data.write_text(json.dumps({"X": {"rows": 2}}))
        code = main(["--env-file", str(env_file), "fit", "--data", str(data), "--model", "glm", "--out", str(tmp_path / "fit.json")])
        assert code == 2
        assert "❌ Error:" in capsys.readouterr().out

    def test_invalid_json_config_returns_two(self, env_file, tmp_path):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"ranks": []}))
        data = tmp_path / "data.json"
        data.write_text("{}")
        code = main(["--env-file", str(env_file), "cv", "--data", str(data), "--grid", str(grid)])
        assert code == 2


class TestFitCommand:
    """The fit subcommand."""

    def test_fit_writes_params_and_manifest(self, env_file, gaussian_dataset, tmp_path, temp_test_dir):
        data = tmp_path / "data.json"
        gaussian_dataset.save(data)
        out = tmp_path / "fits" / "hirrr.json"
        code = main(
            ["--env-file", str(env_file), "--seed", "3", "fit", "--data", str(data), "--model", "hirrr", "--rank", "2", "--lambda", "0.5", "--out", str(out)]
        )
        assert code == 0
        params = ModelParams.load(out)
        assert params.rank == 2
        assert params.check_invariants()

        manifest = json.loads((out.parent / "manifest.json").read_text())
        assert manifest["command"] == "fit"
        assert manifest["seed"] == 3
        assert manifest["config"]["model"]["lambda"] == 0.5
        assert set(manifest["versions"]) >= {"hirrr", "numpy", "scipy", "python"}

        audit = (temp_test_dir / "logs" / "audit.log").read_text()
        assert "fit" in audit

    @pytest.mark.parametrize("estimator", ["glm", "rrr"])
    def test_fit_baselines(self, env_file, gaussian_dataset, tmp_path, estimator):
        data = tmp_path / "data.json"
        gaussian_dataset.save(data)
        out = tmp_path / f"{estimator}.json"
        args = ["--env-file", str(env_file), "fit", "--data", str(data), "--model", estimator, "--out", str(out)]
        if estimator == "rrr":
            args += ["--rank", "1"]
        assert main(args) == 0
        params = ModelParams.load(out)
        assert params.C.shape == (gaussian_dataset.p, gaussian_dataset.q)
        if estimator == "glm":
            np.testing.assert_array_equal(params.B, np.eye(gaussian_dataset.q))

"""
Tests for the command-line entry point.
"""
import json

import pandas as pd
import pytest

from conflictgrid import main as cli
from conflictgrid.schemas.experiment import ExperimentConfig


@pytest.fixture
def config_file(tmp_path, small_config):
    path = tmp_path / "experiment.json"
    path.write_text(small_config.model_dump_json())
    return path


class TestConfigs:
    """The configs subcommand."""

    def test_counts(self, capsys):
        assert cli.main(["configs"]) == cli.EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["total"] == 355
        assert payload["per_kind"]["area"] == 100

    def test_list(self, capsys):
        assert cli.main(["configs", "--list"]) == cli.EXIT_OK
        keys = capsys.readouterr().out.splitlines()
        assert len(keys) == 355
        assert "gambino@2" in keys

    def test_schema(self, capsys):
        assert cli.main(["configs", "--schema"]) == cli.EXIT_OK
        assert "designated_indicator" in json.loads(capsys.readouterr().out)["properties"]


class TestLoadConfig:
    """Experiment config from file plus overrides."""

    def test_overrides(self, config_file, tmp_path):
        args = cli.create_parser().parse_args(
            ["sweep", "--config", str(config_file), "--seed", "40", "--out-dir", str(tmp_path)]
        )
        config = cli.load_config(args)
        assert config.seeds == [40]
        assert config.output_dir == str(tmp_path)
        assert config.sensors == ["sonar"]

    def test_no_overrides(self, config_file, small_config):
        args = cli.create_parser().parse_args(["sweep", "--config", str(config_file)])
        assert cli.load_config(args) == small_config

    def test_dump_validates(self, small_config):
        """A dumped config, grid included, validates back to itself."""
        dumped = small_config.model_dump()
        assert "cells" not in dumped["grid"]
        assert ExperimentConfig.model_validate(dumped) == small_config
        assert ExperimentConfig.model_validate_json(small_config.model_dump_json()) == small_config


class TestCommands:
    """Subcommands end to end, with the expensive parts patched where noted."""

    def test_sweep_reports(self, mocker, config_file, capsys):
        frame = pd.DataFrame({"run_id": []})
        fake_report = mocker.Mock(text="report body\n")
        run_sweep = mocker.patch.object(cli, "sweep", return_value=frame)
        run_report = mocker.patch.object(cli, "report", return_value=fake_report)

        assert cli.main(["sweep", "--config", str(config_file), "--workers", "3"]) == 0
        config = run_sweep.call_args.args[0]
        assert isinstance(config, ExperimentConfig)
        assert config.workers == 3
        run_report.assert_called_once()
        assert capsys.readouterr().out == "report body\n"

    def test_simulate_map_score(self, config_file, tmp_path, capsys):
        out = tmp_path / "out"
        common = ["--config", str(config_file), "--out-dir", str(out)]
        assert cli.main(["simulate", *common, "--hallway", "narrow"]) == 0
        logs = json.loads(capsys.readouterr().out)["run_logs"]
        assert len(logs) == 1

        assert cli.main(["map", logs[0], *common]) == 0
        mapped = json.loads(capsys.readouterr().out)
        assert mapped["scanned_cells"] > 0
        for name in ("grid.npz", "occupied.pgm", "truth.pgm", "cell_stats.csv"):
            assert (out / name).exists()

        assert cli.main(["score", mapped["grid"], *common, "--log", logs[0]]) == 0
        scored = json.loads(capsys.readouterr().out)
        assert scored["hallway"] == "narrow"
        assert scored["error"] >= 0.0
        assert (out / "error_image.pgm").exists()

    def test_failure_exit_code(self, tmp_path):
        assert cli.main(["map", str(tmp_path / "missing.jsonl")]) == cli.EXIT_FAILURE

    def test_unknown_hallway(self, config_file, tmp_path):
        args = ["simulate", "--config", str(config_file), "--out-dir", str(tmp_path)]
        assert cli.main([*args, "--hallway", "atrium"]) == cli.EXIT_FAILURE

    def test_invalid_config(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"sample_count": 50}))
        assert cli.main(["sweep", "--config", str(path)]) == cli.EXIT_FAILURE

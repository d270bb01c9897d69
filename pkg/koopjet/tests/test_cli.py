"""Tests for the command-line surface and its exit codes."""
import argparse
import json

import pytest

from koopjet import cli
from koopjet.config import EXIT_CONFIG_ERROR, EXIT_OK


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    """Fixture removing the output and seed overrides from the environment."""
    monkeypatch.delenv("KOOPJET_OUT", raising=False)
    monkeypatch.delenv("KOOPJET_SEED", raising=False)


@pytest.mark.parametrize("text, expected", [
    ("6", [6]),
    ("4..8", [4, 5, 6, 7, 8]),
    ("4,6,8", [4, 6, 8]),
])
def test_parse_orders(text, expected):
    """Single orders, ranges and lists are accepted."""
    assert cli.parse_orders(text) == expected


@pytest.mark.parametrize("text", ["six", "8..4", "0", "4..x"])
def test_parse_orders_rejects(text):
    """Non-numeric, empty and non-positive ranges are argument errors."""
    with pytest.raises(argparse.ArgumentTypeError):
        cli.parse_orders(text)


def test_parser_requires_subcommand():
    """Running without a stage is a usage error."""
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args([])


def test_spectrum_options():
    """The spectrum stage takes an order range and an eigenvalue mode."""
    args = cli.build_parser().parse_args(["spectrum", "--order", "4..6", "--mode", "both"])
    assert args.order == [4, 5, 6]
    assert args.mode == "both"


def test_config_without_plant_exits_with_config_code(tmp_path):
    """A pipeline document without a plant block maps to the configuration exit code."""
    path = tmp_path / "pipeline.json"
    path.write_text(json.dumps({"seed": 0}))
    assert cli.main(["report", "--config", str(path)]) == EXIT_CONFIG_ERROR


def test_report_without_evaluations_exits_with_config_code(tmp_path):
    """Reporting before any evaluation is a missing-artifact configuration error."""
    path = tmp_path / "pipeline.json"
    path.write_text(json.dumps({"plant": {}}))
    assert cli.main(["report", "--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_CONFIG_ERROR


def test_report_merges_evaluations(tmp_path, capsys):
    """With evaluation summaries present the report stage succeeds and prints its artifacts."""
    out = tmp_path / "out"
    summary = {"controllers": {"pi": {"sea": {"metrics": None, "failed": False}}}, "scenarios": {"sea": "d"}}
    (out / "bench" / "sea").mkdir(parents=True)
    (out / "bench" / "sea" / "summary.json").write_text(json.dumps(summary))
    path = tmp_path / "pipeline.json"
    path.write_text(json.dumps({"plant": {}}))

    assert cli.main(["report", "--config", str(path), "--out", str(out)]) == EXIT_OK
    assert (out / "report" / "summary.json").exists()
    assert "report_table" in capsys.readouterr().out

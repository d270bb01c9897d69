"""Tests for loading, overriding and seeding the pipeline configuration."""
import json

import pytest

from koopjet.errors import ConfigurationError
from koopjet.pipeline_config import CONTROLLER_NAMES, load_pipeline_config


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    """Fixture removing the output and seed overrides from the environment."""
    monkeypatch.delenv("KOOPJET_OUT", raising=False)
    monkeypatch.delenv("KOOPJET_SEED", raising=False)


@pytest.fixture
def write_config(tmp_path):
    """Fixture providing a writer of pipeline documents into a temporary directory."""

    def _write(payload, name="pipeline.json"):
        path = tmp_path / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
        return path

    return _write


def test_packaged_default_loads():
    """The packaged document designs every controller with the default engine."""
    config = load_pipeline_config()
    assert config.control.controllers == list(CONTROLLER_NAMES)
    assert config.koopman.order == 6
    assert (config.control.search.population, config.control.search.generations) == (100, 100)
    assert config.plant.design.N_max > config.plant.design.N_idle


def test_empty_plant_block_means_defaults(write_config):
    """An empty plant block selects the packaged engine constants."""
    config = load_pipeline_config(write_config({"plant": {}}))
    assert config.out_dir == "out"
    assert config.seed == 0


@pytest.mark.parametrize("content, message", [
    ({"seed": 1}, "plant"),
    ("{not json", "not valid JSON"),
    ({"plant": {}, "schema_version": 99}, "schema_version"),
    ({"plant": {}, "control": {"controllers": ["pid"]}}, "Unknown controllers"),
    ({"plant": {}, "bench": {"scenarios": ["cruise"]}}, "Unknown scenarios"),
])
def test_invalid_documents(write_config, content, message):
    """Malformed or invalid documents are configuration errors naming the problem."""
    with pytest.raises(ConfigurationError, match=message):
        load_pipeline_config(write_config(content))


def test_missing_file(tmp_path):
    """A missing document is a configuration error."""
    with pytest.raises(ConfigurationError, match="not found"):
        load_pipeline_config(tmp_path / "absent.json")


def test_override_precedence(write_config, monkeypatch):
    """Arguments win over the environment, which wins over the file."""
    path = write_config({"plant": {}, "out_dir": "from_file", "seed": 1})
    monkeypatch.setenv("KOOPJET_OUT", "from_env")
    monkeypatch.setenv("KOOPJET_SEED", "2")

    config = load_pipeline_config(path)
    assert (config.out_dir, config.seed) == ("from_env", 2)

    config = load_pipeline_config(path, out_dir="from_args", seed=3, progress=True)
    assert (config.out_dir, config.seed) == ("from_args", 3)
    assert config.progress
    assert config.sindy.progress


def test_non_integer_seed_in_environment(write_config, monkeypatch):
    """KOOPJET_SEED must parse as an integer."""
    monkeypatch.setenv("KOOPJET_SEED", "abc")
    with pytest.raises(ConfigurationError, match="KOOPJET_SEED"):
        load_pipeline_config(write_config({"plant": {}}))


def test_stage_seeds_follow_root_seed(write_config):
    """Every stage seed is the root seed plus a fixed offset."""
    config = load_pipeline_config(write_config({"plant": {}}), seed=10)
    assert config.seeds() == {
        "root": 10,
        "training": 10,
        "test": 11,
        "koopman": 12,
        "lpv_pi": 13,
        "weight_search": 14,
        "scenarios": 15,
    }
    assert config.control.search.seed == 14
    assert config.bench.scenario.seed == 15

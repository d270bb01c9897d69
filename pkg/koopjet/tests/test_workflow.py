"""Tests for the stage graph and the artifact-merging report stage."""
import json

import pytest

from koopjet.errors import ConfigurationError
from koopjet.pipeline_config import PipelineConfig, load_pipeline_config
from koopjet.plant.config import PlantConfig
from koopjet.workflow import STAGE_ORDER, PipelineWorkflow, run_pipeline, stages


@pytest.fixture
def config(tmp_path) -> PipelineConfig:
    """Fixture providing a seeded configuration writing into a temporary directory."""
    return PipelineConfig(plant=PlantConfig(), out_dir=str(tmp_path / "out"), seed=4).seeded()


@pytest.fixture
def fake_stages(monkeypatch):
    """Fixture replacing every stage with one that records its call and returns one artifact."""
    calls = []

    def make(name):
        def stage(config, *args):
            calls.append(name)
            return {"artifacts": {name: f"{config.out_dir}/{name}"}}

        return stage

    for name in STAGE_ORDER:
        monkeypatch.setattr(stages, name, make(name))
    return calls


def test_pipeline_runs_stages_in_order(config, fake_stages):
    """Stages run once each, in order, and their artifacts accumulate."""
    output = PipelineWorkflow(config).run()
    assert fake_stages == list(STAGE_ORDER)
    assert output["completed"] == list(STAGE_ORDER)
    assert set(output["artifacts"]) == set(STAGE_ORDER)
    assert output["seeds"]["koopman"] == 6


def test_pipeline_checkpoints_every_stage(config, fake_stages):
    """The memory checkpointer keeps a snapshot per executed node."""
    workflow = PipelineWorkflow(config, thread_id="history")
    workflow.run()
    assert len(workflow.get_state_history()) >= len(STAGE_ORDER)
    assert workflow.get_state().values["completed"] == list(STAGE_ORDER)


def test_failing_stage_keeps_error_type(config, fake_stages, monkeypatch):
    """With fail-fast a stage's configuration error reaches the caller unchanged."""

    def broken(_config):
        raise ConfigurationError("missing training data")

    monkeypatch.setattr(stages, "identify", broken)
    with pytest.raises(ConfigurationError, match="missing training data"):
        PipelineWorkflow(config, error_logging=False).run()
    assert fake_stages == ["simulate"]


def test_failing_stage_recorded_without_fail_fast(config, fake_stages, monkeypatch):
    """Without fail-fast the failure is recorded and later stages still run."""

    def broken(_config):
        raise ConfigurationError("missing training data")

    monkeypatch.setattr(stages, "identify", broken)
    output = PipelineWorkflow(config, fail_fast=False, error_logging=False).run()
    assert output["completed"] == list(STAGE_ORDER)
    assert "identify" not in output["artifacts"]
    assert fake_stages[-1] == "report"


def test_report_stage_merges_scenarios(config):
    """Per-scenario summaries merge into one report with the stage seeds and a flat table."""
    paths = stages.layout(config)
    for scenario, wiae in (("sea", 10.0), ("varying", 20.0)):
        target = paths.evaluation(scenario) / "summary.json"
        target.parent.mkdir(parents=True)
        run = {"metrics": {"wIAE": {"value": wiae, "unit": "RPM*s"}}, "failed": False}
        target.write_text(json.dumps({"controllers": {"klqgi": {scenario: run}}, "scenarios": {scenario: scenario}}))

    stages.report(config)
    summary = json.loads(paths.report.read_text())
    assert set(summary["controllers"]["klqgi"]) == {"sea", "varying"}
    assert summary["seeds"]["scenarios"] == 9
    table = stages.summary_frame(summary)
    assert table["wIAE"].tolist() == [10.0, 20.0]


def test_evaluate_needs_designs(config):
    """Evaluation without any saved controller is a configuration error."""
    with pytest.raises(ConfigurationError, match="No controller designs"):
        stages.evaluate(config)


@pytest.mark.slow
def test_packaged_pipeline_ranks_governors_on_sea_level_profile(tmp_path):
    """End to end on the reference engine: K-LQGI < IMC < LPV-PI < PI in wIAE, K-LQGI settles the 0.5 to 1 step within 5 s."""
    config = load_pipeline_config(out_dir=str(tmp_path / "out"))
    config = config.model_copy(update={"bench": config.bench.model_copy(update={"scenarios": ["sea"]})})
    run_pipeline(config)

    summary = json.loads(stages.layout(config).report.read_text())
    runs = {name: summary["controllers"][name]["sea"] for name in ("klqgi", "imc", "lpv-pi", "pi")}
    assert not any(run["failed"] for run in runs.values())
    wiae = [runs[name]["metrics"]["wIAE"]["value"] for name in ("klqgi", "imc", "lpv-pi", "pi")]
    assert wiae == sorted(wiae)
    assert len(set(wiae)) == 4
    assert runs["klqgi"]["metrics"]["MST"]["value"] <= 5.0

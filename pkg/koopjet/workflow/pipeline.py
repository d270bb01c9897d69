"""End-to-end pipeline as a compiled state graph over the stage functions."""

from __future__ import annotations

import logging
from functools import partial
from typing import Any

from langgraph.graph import END, START, StateGraph

from koopjet.pipeline_config import PipelineConfig
from koopjet.workflow import stages
from koopjet.workflow.base import PipelineState, WorkflowBase

logger = logging.getLogger(__name__)

STAGE_ORDER: tuple[str, ...] = ("simulate", "identify", "spectrum", "design", "evaluate", "report")


class PipelineWorkflow(WorkflowBase):
    """simulate -> identify -> spectrum -> design -> evaluate -> report, checkpointed per stage."""

    def __init__(
        self,
        config: PipelineConfig,
        thread_id: str = "koopjet",
        fail_fast: bool = True,
        error_logging: bool = True,
    ) -> None:
        """Initialize the pipeline.

        Args:
            config: Resolved pipeline configuration shared by every stage.
            thread_id: Checkpoint thread identifier.
            fail_fast: Whether to stop at the first failing stage.
            error_logging: Whether to log stage failures.
        """
        self._config: PipelineConfig = config
        super().__init__(thread_id=thread_id, fail_fast=fail_fast, error_logging=error_logging)

    @property
    def config(self) -> PipelineConfig:
        return self._config

    def _add_workflow_nodes_and_edges(self, workflow: StateGraph) -> None:
        for name in STAGE_ORDER:
            workflow.add_node(name, self._stage_node(name, partial(getattr(stages, name), self._config)))
        workflow.add_node("finalize", self._finalize)
        workflow.add_edge(START, STAGE_ORDER[0])
        for current, following in zip(STAGE_ORDER, STAGE_ORDER[1:]):
            workflow.add_edge(current, following)
        workflow.add_edge(STAGE_ORDER[-1], "finalize")
        workflow.add_edge("finalize", END)

    def _finalize(self, state: PipelineState) -> PipelineState:
        output: dict[str, Any] = {
            "artifacts": state.get("artifacts", {}),
            "completed": state.get("completed", []),
            "seeds": self._config.seeds(),
        }
        logger.info("Pipeline finished: %s", ", ".join(output["completed"]))
        return PipelineState(final_output=output)


def run_pipeline(config: PipelineConfig, fail_fast: bool = True) -> dict[str, Any]:
    return PipelineWorkflow(config, fail_fast=fail_fast).run()

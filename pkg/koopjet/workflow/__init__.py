"""Pipeline stages and their graph runner."""

from koopjet.workflow.base import PipelineState, WorkflowBase
from koopjet.workflow.pipeline import STAGE_ORDER, PipelineWorkflow, run_pipeline

__all__ = [
    "PipelineState",
    "PipelineWorkflow",
    "STAGE_ORDER",
    "WorkflowBase",
    "run_pipeline",
]

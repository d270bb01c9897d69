"""Graph workflow base: state schema, checkpointed compilation and node wrapping."""

from __future__ import annotations

from abc import ABC, abstractmethod
import logging
from typing import (
    TYPE_CHECKING,
    Any,
    Callable,
    TypedDict,
)

from langgraph.checkpoint.memory import MemorySaver
from langgraph.graph import StateGraph

from koopjet.errors import KoopjetError

if TYPE_CHECKING:
    from langgraph.graph.state import CompiledStateGraph
    from langgraph.types import StateSnapshot

logger = logging.getLogger(__name__)


class PipelineState(TypedDict, total=False):
    """State passed between pipeline stages."""

    # Artifact name -> path, accumulated over the stages.
    artifacts: dict[str, str]
    # Stage names in completion order.
    completed: list[str]
    # Output of the most recent stage.
    node_output: dict[str, Any] | None
    # Final output of the workflow.
    final_output: dict[str, Any] | None


StageFunction = Callable[[], dict[str, Any]]


class WorkflowBase(ABC):
    """Core workflow functionality: build, compile with memory checkpointing, run and inspect."""

    def __init__(
        self,
        thread_id: str,
        fail_fast: bool = True,
        error_logging: bool = True,
    ) -> None:
        """Initialize the workflow base.

        Args:
            thread_id: Unique identifier for the workflow thread, used for checkpointing and state management.
            fail_fast: Whether to stop at the first failing stage (True) or record the failure and continue (False).
            error_logging: Whether to log failures of stages.
        """
        self._thread_config: dict[str, Any] = {
            "configurable": {
                "thread_id": thread_id,
            },
        }
        self._fail_fast: bool = fail_fast
        self._error_logging: bool = error_logging
        self._graph: CompiledStateGraph = self._build_graph()

    @property
    def graph(self) -> CompiledStateGraph:
        return self._graph

    def run(
        self,
        initial_state: PipelineState | None = None,
    ) -> dict[str, Any]:
        """Run the workflow.

        Args:
            initial_state: Optional initial state to start from. If None, creates a new empty state.

        Returns:
            Workflow output.

        Raises:
            KoopjetError: Stage failures keep their type so callers can map them to exit codes.
            RuntimeError: For any other failure.
        """
        state_to_run: PipelineState = initial_state or PipelineState(
            artifacts={},
            completed=[],
            node_output=None,
            final_output=None,
        )
        try:
            final_state: PipelineState = self._graph.invoke(
                input=state_to_run,
                config=self._thread_config,
            )
        except KoopjetError:
            raise
        except Exception as e:
            raise RuntimeError(f"Workflow failed with error: {str(e)}.") from e
        return final_state.get("final_output") or {}

    def get_state(self) -> StateSnapshot:
        """Get the current state of the workflow."""
        return self._graph.get_state(config=self._thread_config)

    def get_state_history(self) -> list[StateSnapshot]:
        """Get the history of states for the workflow, most recent first."""
        return list(self._graph.get_state_history(config=self._thread_config))

    def _stage_node(self, name: str, stage: StageFunction) -> Callable[[PipelineState], PipelineState]:
        """Wrap a stage function as a graph node that merges its artifacts into the state.

        Args:
            name: Stage name recorded in `completed`.
            stage: Function returning a mapping with an optional `artifacts` entry.
        """

        def node(state: PipelineState) -> PipelineState:
            try:
                output: dict[str, Any] = stage()
            except Exception as e:
                if self._error_logging:
                    logger.error(f"Stage {name} failed: {e}", exc_info=True)
                if self._fail_fast:
                    raise
                output = {"error": f"{type(e).__name__}: {e}"}
            artifacts: dict[str, str] = {**state.get("artifacts", {}), **output.get("artifacts", {})}
            return PipelineState(
                artifacts=artifacts,
                completed=[*state.get("completed", []), name],
                node_output={"stage": name, **output},
            )

        return node

    @abstractmethod
    def _add_workflow_nodes_and_edges(self, workflow: StateGraph) -> None:
        """Add workflow-specific nodes and edges to the graph.

        Args:
            workflow: The StateGraph to add nodes and edges to.
        """
        ...

    def _build_graph(self) -> CompiledStateGraph:
        """Create the graph, add nodes and edges via the abstract method, and compile it."""
        workflow: StateGraph = StateGraph(state_schema=PipelineState)

        # Add workflow-specific nodes and edges.
        self._add_workflow_nodes_and_edges(workflow=workflow)

        # Compile graph with memory checkpointing.
        return workflow.compile(checkpointer=MemorySaver())

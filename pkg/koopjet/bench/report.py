"""Trace CSVs and the controller-by-scenario summary table."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

import pandas as pd

from koopjet.bench.metrics import Metrics
from koopjet.bench.runner import TRACE_COLUMNS, TrackingResult
from koopjet.bench.scenarios import Scenario
from koopjet.datakit.storage import FLOAT_FORMAT
from utils.json_helpers import content_hash, dump_json, load_json

logger = logging.getLogger(__name__)

SUMMARY_FILE: str = "summary.json"


def trace_path(out_dir: str | Path, controller: str, scenario: str) -> Path:
    return Path(out_dir) / "traces" / f"{controller}_{scenario}.csv"


def write_trace(result: TrackingResult, out_dir: str | Path) -> Path:
    target: Path = trace_path(out_dir, result.controller, result.scenario)
    target.parent.mkdir(parents=True, exist_ok=True)
    result.trace[TRACE_COLUMNS].to_csv(target, index=False, float_format=FLOAT_FORMAT)
    return target


def read_trace(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path)


def summary_table(
    results: list[tuple[TrackingResult, Metrics | None]],
    scenarios: dict[str, Scenario],
    lineage_hash: str | None = None,
) -> dict[str, Any]:
    """Summary keyed by controller, then scenario, each metric carrying its unit."""
    if not results:
        raise ValueError("Report needs at least one tracking result.")
    controllers: dict[str, dict[str, Any]] = {}
    for result, metrics in results:
        controllers.setdefault(result.controller, {})[result.scenario] = {
            "metrics": None if metrics is None else metrics.to_dict(),
            "failed": result.failed,
            "message": result.message,
            "samples": len(result.trace),
        }
    return {
        "controllers": controllers,
        "scenarios": {name: scenario.digest() for name, scenario in sorted(scenarios.items())},
        "lineage_hash": lineage_hash,
    }


def write_report(
    results: list[tuple[TrackingResult, Metrics | None]],
    scenarios: dict[str, Scenario],
    out_dir: str | Path,
    lineage_hash: str | None = None,
) -> Path:
    """Write one CSV per trace and the JSON summary.

    Raises:
        ValueError: If `results` is empty.
    """
    summary: dict[str, Any] = summary_table(results, scenarios, lineage_hash)
    for result, _ in results:
        write_trace(result, out_dir)
    target: Path = dump_json(summary, Path(out_dir) / SUMMARY_FILE)
    logger.info("Wrote report %s (%d runs, digest %s)", target, len(results), content_hash(summary)[:12])
    return target


def merge_summaries(paths: list[str | Path]) -> dict[str, Any]:
    """Merge per-scenario summaries written by separate evaluation runs.

    Later files win on a repeated controller and scenario pair.
    """
    if not paths:
        raise ValueError("No summaries to merge.")
    merged: dict[str, Any] = {"controllers": {}, "scenarios": {}, "lineage_hash": None}
    for path in paths:
        part: dict[str, Any] = load_json(path)
        for controller, runs in part.get("controllers", {}).items():
            merged["controllers"].setdefault(controller, {}).update(runs)
        merged["scenarios"].update(part.get("scenarios", {}))
        merged["lineage_hash"] = part.get("lineage_hash") or merged["lineage_hash"]
    return merged

"""Dataset and plant-trace files."""

from __future__ import annotations

import logging
from pathlib import Path

import pandas as pd

from koopjet.datakit.dataset import Dataset, DatasetLineage
from koopjet.errors import ConfigurationError
from utils.json_helpers import dump_json, load_json

logger = logging.getLogger(__name__)

FLOAT_FORMAT: str = "%.10g"
PLANT_TRACE_COLUMNS: list[str] = ["t", "N", "W_f", "v_cmd", "thrust", "T_t", "clamp"]


def lineage_path(csv_path: str | Path) -> Path:
    path: Path = Path(csv_path)
    return path.with_name(f"{path.stem}.lineage.json")


def write_dataset(dataset: Dataset, path: str | Path) -> Path:
    """Write the dataset table and its `<stem>.lineage.json` sidecar."""
    target: Path = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    dataset.to_frame().to_csv(target, index=False, float_format=FLOAT_FORMAT)
    dump_json(dataset.lineage.model_dump(), lineage_path(target))
    logger.info("Wrote dataset %s (%d rows)", target, len(dataset))
    return target


def read_dataset(path: str | Path) -> Dataset:
    """Read a dataset table with its lineage sidecar.

    Raises:
        ConfigurationError: If the table or the sidecar is missing or malformed.
    """
    source: Path = Path(path)
    if not source.exists():
        raise ConfigurationError(f"Dataset not found: {source}.")
    sidecar: Path = lineage_path(source)
    if not sidecar.exists():
        raise ConfigurationError(f"Dataset lineage not found: {sidecar}.")
    try:
        frame: pd.DataFrame = pd.read_csv(source)
        lineage: DatasetLineage = DatasetLineage.model_validate(load_json(sidecar))
        return Dataset.from_frame(frame, lineage)
    except (ValueError, KeyError) as e:
        raise ConfigurationError(f"Malformed dataset {source}: {e}") from e


def write_plant_trace(frame: pd.DataFrame, path: str | Path) -> Path:
    """Write a plant trace with the fixed column order."""
    missing: list[str] = [c for c in PLANT_TRACE_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"Plant trace lacks columns {missing}.")
    target: Path = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    frame[PLANT_TRACE_COLUMNS].to_csv(target, index=False, float_format=FLOAT_FORMAT)
    return target


def read_plant_trace(path: str | Path) -> pd.DataFrame:
    source: Path = Path(path)
    if not source.exists():
        raise ConfigurationError(f"Plant trace not found: {source}.")
    return pd.read_csv(source)

"""JSON utility functions shared by the pipeline stages."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel

TIMESTAMP_FIELD: str = "created_at"


def is_valid_json(json_string: str) -> bool:
    """Check if a string is valid JSON.

    Args:
        json_string: The string to validate.

    Returns:
        True if the string is valid JSON, False otherwise.
    """
    try:
        json.loads(json_string)
        return True
    except (json.JSONDecodeError, ValueError):
        return False


def to_jsonable(value: Any) -> Any:
    """Convert numpy values, dataclasses and pydantic models into plain JSON types.

    Non-finite floats become strings ("inf", "-inf", "nan") so the output stays valid JSON.
    """
    if isinstance(value, BaseModel):
        return to_jsonable(value.model_dump())
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        number: float = float(value)
        if np.isfinite(number):
            return number
        return "nan" if np.isnan(number) else ("inf" if number > 0 else "-inf")
    if isinstance(value, Path):
        return str(value)
    return value


def content_hash(payload: Any) -> str:
    """SHA-256 of the canonical JSON form, ignoring the timestamp field."""
    body: Any = to_jsonable(payload)
    if isinstance(body, dict):
        body = {k: v for k, v in body.items() if k != TIMESTAMP_FIELD}
    canonical: str = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def dump_json(payload: dict[str, Any], path: str | Path, timestamp: bool = True) -> Path:
    """Write a payload with sorted keys and an optional creation timestamp.

    Returns:
        The written path.
    """
    body: dict[str, Any] = to_jsonable(payload)
    if timestamp:
        body[TIMESTAMP_FIELD] = datetime.now(timezone.utc).isoformat()
    target: Path = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    return target


def load_json(path: str | Path) -> dict[str, Any]:
    """Read a JSON object from disk, dropping the timestamp field."""
    body: dict[str, Any] = json.loads(Path(path).read_text())
    body.pop(TIMESTAMP_FIELD, None)
    return body

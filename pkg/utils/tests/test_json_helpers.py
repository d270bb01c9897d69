"""Tests for the JSON helpers and the class loader shared by the pipeline stages."""
import json
from dataclasses import dataclass

import numpy as np
import pytest

from koopjet.control.base import ControllerBase
from koopjet.control.pi import PiController
from koopjet.datakit.normalization import NormalizationSpec
from utils.dynamic_loading import load_class, split_reference
from utils.json_helpers import content_hash, dump_json, is_valid_json, load_json, to_jsonable


@dataclass(frozen=True)
class _Point:
    x: float
    tags: tuple[str, ...]


@pytest.mark.parametrize("text, expected", [
    ('{"a": 1}', True),
    ("[1, 2, 3]", True),
    ("{'a': 1}", False),  # Single quotes are not JSON
    ("", False),
])
def test_is_valid_json(text, expected):
    """JSON validity of raw strings."""
    assert is_valid_json(text) is expected


def test_to_jsonable_converts_numeric_types():
    """Arrays, numpy scalars, dataclasses and models become plain JSON values."""
    payload = {
        "array": np.array([1.5, np.inf]),
        "count": np.int64(3),
        "flag": np.bool_(True),
        "point": _Point(x=-np.inf, tags=("a",)),
        "spec": NormalizationSpec(),
        1: float("nan"),
    }
    body = to_jsonable(payload)
    assert body["array"] == [1.5, "inf"]
    assert body["count"] == 3 and isinstance(body["count"], int)
    assert body["flag"] is True
    assert body["point"] == {"x": "-inf", "tags": ["a"]}
    assert body["spec"]["S_N"] == 10000.0
    assert body["1"] == "nan"
    assert is_valid_json(json.dumps(body))


def test_content_hash_ignores_timestamp_and_key_order():
    """Hashes depend on content only."""
    assert content_hash({"a": 1, "b": [1, 2]}) == content_hash({"b": [1, 2], "a": 1, "created_at": "now"})
    assert content_hash({"a": 1}) != content_hash({"a": 2})


def test_dump_and_load_json(tmp_path):
    """Written files carry a timestamp that reading drops again."""
    target = dump_json({"values": np.arange(3)}, tmp_path / "nested" / "out.json")
    assert "created_at" in json.loads(target.read_text())
    assert load_json(target) == {"values": [0, 1, 2]}
    assert "created_at" not in json.loads(dump_json({}, tmp_path / "bare.json", timestamp=False).read_text())


@pytest.mark.parametrize("reference", ["koopjet.control.pi", "koopjet.control.pi:", ":PiController", "a:b:c"])
def test_split_reference_rejects_malformed(reference):
    """References need exactly one module and one class part."""
    with pytest.raises(ValueError):
        split_reference(reference)


def test_load_class():
    """A reference resolves to its class and is checked against the base."""
    assert load_class("koopjet.control.pi:PiController", base=ControllerBase) is PiController
    with pytest.raises(TypeError):
        load_class("koopjet.datakit.normalization:NormalizationSpec", base=ControllerBase)
    with pytest.raises(AttributeError):
        load_class("koopjet.control.pi:Missing")
    with pytest.raises(ModuleNotFoundError):
        load_class("koopjet.nowhere:Thing")

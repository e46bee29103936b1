import numpy as np
import pytest

from ensemble_oc import ControlSchedule, uniform_plan
from ensemble_oc.reporting import (
    load_report_schema,
    read_controls_csv,
    validate_schema,
    write_controls_csv,
)


def test_controls_csv_roundtrip(tmp_path, rng):
    plan = uniform_plan(1.0, 2, 0.1)
    sched = ControlSchedule.from_stacked(plan, rng.standard_normal((10, 3)))
    path = tmp_path / "controls.csv"
    write_controls_csv(path, plan, sched)
    back = read_controls_csv(path, plan)
    # 17 significant digits reproduce doubles exactly
    np.testing.assert_array_equal(back.stacked(), sched.stacked())


def test_schema_loads():
    schema = load_report_schema()
    assert schema["type"] == "object"
    assert "status" in schema["required"]


def test_validator_flags_missing_and_bad_type():
    schema = {
        "type": "object",
        "required": ["a"],
        "properties": {"a": {"type": "integer"}, "b": {"type": "string"}},
    }
    validate_schema({"a": 1}, schema)
    with pytest.raises(ValueError, match="missing required key 'a'"):
        validate_schema({}, schema)
    with pytest.raises(ValueError, match=r"\$\.a"):
        validate_schema({"a": "no"}, schema)
    with pytest.raises(ValueError):
        validate_schema({"a": True}, schema)  # bool is not an integer here


def test_validator_enum_and_items():
    schema = {"type": "array", "items": {"type": "string", "enum": ["x", "y"]}}
    validate_schema(["x", "y", "x"], schema)
    with pytest.raises(ValueError, match=r"\[2\]"):
        validate_schema(["x", "y", "z"], schema)

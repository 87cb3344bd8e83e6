import json
import warnings
from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankone.tower import (
    SchemaError,
    StageParams,
    TowerSchema,
    build_schema,
    load_schema,
    minimal_spacers,
    next_height,
    validate,
)


def test_minimal_spacers_examples():
    assert minimal_spacers(1, 1, 2) == (10, 101)
    assert minimal_spacers(5, 37, 1) == (370,)
    assert minimal_spacers(2, 113, 4) == (1130, 11301, 113011, 1130111)


@pytest.mark.parametrize("n,r", [(0, 2), (3, 0)])
def test_minimal_spacers_rejects_bad_input(n, r):
    with pytest.raises(SchemaError):
        minimal_spacers(1, n, r)


def test_next_height_examples():
    assert next_height(1, StageParams(1, 2, (10, 101))) == 113
    assert next_height(7, StageParams(3, 1, (70,))) == 77
    assert next_height(113, StageParams(2, 4, minimal_spacers(2, 113, 4))) == 1256005
    assert 113 * 4 + 1130 + 11301 + 113011 + 1130111 == 1256005


def test_build_schema_pins():
    s1 = build_schema(1)
    assert s1.heights == (1, 113)
    assert s1.offsets == ((0, 11),)
    s2 = build_schema(2)
    assert s2.heights[2] == 1256005
    assert s2.base_widths == (1, Fraction(1, 2), Fraction(1, 8))


def test_build_schema_depth_zero():
    with pytest.raises(SchemaError):
        build_schema(0)


def test_depth_cap_env(monkeypatch):
    monkeypatch.setenv("RANKONE_MAX_STAGE", "2")
    with pytest.raises(SchemaError, match="cap"):
        build_schema(3)
    monkeypatch.setenv("RANKONE_MAX_STAGE", "9")
    assert build_schema(3).depth == 3


@pytest.mark.parametrize("depth", range(1, 7))
def test_built_schemas_validate(depth):
    s = build_schema(depth)
    assert validate(s) == []
    for j in range(1, depth + 1):
        st_ = s.stage(j)
        offs = s.column_offsets(j)
        assert offs[-1] + s.height(j) + st_.spacers[-1] == s.height(j + 1)
        assert s.height(j + 1) > 10 * s.height(j) * st_.r
    prod = 1
    for j in range(1, depth + 2):
        assert s.width(j) * prod == 1
        if j <= depth:
            prod *= s.stage(j).r


def test_override_validation_names_stage_and_index():
    with pytest.raises(SchemaError, match=r"spacer growth at \(2,3\)"):
        build_schema(2, {2: [1130, 11301, 11302, 1130111]})
    with pytest.raises(SchemaError, match=r"first spacer at \(2,1\)"):
        build_schema(2, {2: [1129, 11301, 113011, 1130111]})


def test_override_accepted_when_larger():
    s = build_schema(2, {1: [20, 201]})
    assert s.heights[1] == 2 + 20 + 201
    assert validate(s) == []


def test_column_count_warning():
    with pytest.warns(UserWarning, match="r=3"):
        build_schema(1, columns={1: 3})
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_schema(3)


def _tamper(schema, **kw):
    return replace(schema, **kw)


def test_validate_reports_spacer_growth():
    s = build_schema(3)
    bad_stage = StageParams(2, 4, (1130, 1130, 113011, 1130111))
    stages = (s.stages[0], bad_stage, s.stages[2])
    report = validate(_tamper(s, stages=stages))
    assert "spacer growth at (2,2)" in report


def test_validate_reports_height_recurrence():
    s = build_schema(3)
    heights = list(s.heights)
    heights[2] += 1
    report = validate(_tamper(s, heights=tuple(heights)))
    assert "height recurrence at stage 2" in report


def test_validate_reports_offsets_and_widths():
    s = build_schema(2)
    offs = (s.offsets[0], (0, 1243, 12658, 125781))
    assert "offset at (2,3)" in validate(_tamper(s, offsets=offs))
    widths = (Fraction(1), Fraction(1, 3), Fraction(1, 8))
    assert "width recurrence at stage 1" in validate(_tamper(s, base_widths=widths))


def test_json_roundtrip(tmp_path):
    s = build_schema(3)
    doc = s.to_json()
    assert doc["stages"][0] == {"j": 1, "r": 2, "spacers": ["10", "101"]}
    assert TowerSchema.from_json(json.loads(s.dumps())) == s
    minimal_doc = {"stages": doc["stages"]}
    assert TowerSchema.from_json(minimal_doc) == s
    path = tmp_path / "s.json"
    path.write_text(s.dumps())
    assert load_schema(path) == s


def test_json_tampered_height_is_reported(tmp_path):
    doc = build_schema(2).to_json()
    doc["heights"][2] = "1256006"
    loaded = TowerSchema.from_json(doc)
    assert "height recurrence at stage 2" in validate(loaded)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaError, match="height recurrence"):
        load_schema(path)


def test_malformed_json_document():
    with pytest.raises(SchemaError):
        TowerSchema.from_json({"stages": [{"j": 1}]})


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=1, max_size=5))
def test_random_column_counts_validate(rs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = build_schema(len(rs), columns=dict(enumerate(rs, start=1)))
    assert validate(s) == []
    assert all(a < b for a, b in zip(s.heights, s.heights[1:]))

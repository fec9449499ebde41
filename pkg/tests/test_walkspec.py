import json

import numpy as np
import pytest

from oqwalk.linalg import allclose
from oqwalk.walkspec import SpecError, builtin_names, load_rule, load_spec_dict, rule_from_dict, rule_to_dict

HALF = [[0.7071067811865476, 0], [0, 0.7071067811865476]]


def test_builtins_load():
    names = builtin_names()
    assert {"hadamard", "diag_equal", "nonnormal_drift"} <= set(names)
    for name in names:
        assert load_rule(name).N >= 1


@pytest.mark.parametrize("name", ["hadamard", "lazy_b06", "nonnormal_drift"])
def test_roundtrip(name):
    rule = load_rule(name)
    again = rule_from_dict(rule_to_dict(rule, name))
    assert allclose(again.L, rule.L, 0) and allclose(again.R, rule.R, 0)
    assert again.boundary.kind == rule.boundary.kind


def test_segment_and_overrides():
    d = {"N": 2, "L": HALF, "R": HALF, "boundary": {"segment": 5},
         "overrides": [{"site": 2, "L": [[1, 0], [0, 0]], "R": [[0, 0], [0, 1]]}]}
    rule = rule_from_dict(d)
    assert rule.boundary.M == 5 and 2 in rule.overrides
    assert rule_from_dict(rule_to_dict(rule)).overrides.keys() == {2}


def test_explicit_reflecting_matrices():
    d = {"N": 2, "L": HALF, "R": HALF, "boundary": {"reflecting": {"B00": HALF, "B01": HALF}}}
    assert rule_from_dict(d).boundary.b00 is not None


@pytest.mark.parametrize(
    "d,match",
    [
        ({"N": 2, "L": HALF}, "missing key"),
        ({"N": 2, "L": HALF, "R": HALF, "extra": 1}, "unknown walk-spec keys"),
        ({"N": 2, "L": HALF, "R": [[1, 0]]}, "expected shape"),
        ({"N": 2, "L": HALF, "R": HALF, "boundary": "sticky"}, "unrecognized boundary"),
        ({"N": 2, "L": HALF, "R": HALF, "boundary": {"segment": 0}}, "positive integer"),
        ({"N": 2, "L": [[1, 0], [0, 1]], "R": HALF}, "B\\^\\*B"),
        ({"N": 0, "L": HALF, "R": HALF}, "positive integer"),
        ({"N": 2, "L": HALF, "R": HALF, "overrides": [{"L": HALF}]}, "missing site"),
    ],
)
def test_malformed(d, match):
    with pytest.raises(SpecError, match=match):
        rule_from_dict(d)


def test_file_path(tmp_path):
    path = tmp_path / "walk.json"
    path.write_text(json.dumps({"N": 2, "L": HALF, "R": HALF}))
    assert load_spec_dict(str(path))["N"] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(SpecError, match="invalid JSON"):
        load_spec_dict(str(bad))


def test_unknown_name():
    with pytest.raises(SpecError):
        load_rule("no_such_walk")

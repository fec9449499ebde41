"""Strict JSON walk files.

Format::

    {"N": 2,
     "L": <matrix>, "R": <matrix>, "B": <matrix>,          # B optional
     "boundary": "absorbing" | "reflecting" | {"segment": M}
                 | {"reflecting": {"B00": <matrix>, "B01": <matrix>}},
     "overrides": [{"site": 3, "L": <matrix>, "R": <matrix>, "B": <matrix>}],
     "name": "...", "description": "..."}

A ``<matrix>`` is either ``{"rows", "cols", "re", "im"}`` or a nested list of
real numbers.  Unknown keys raise :class:`SpecError`.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .channel import BoundaryCondition, NearestNeighborRule
from .linalg import matrix_from_json, matrix_to_json

TOP_KEYS = {"N", "L", "R", "B", "boundary", "overrides", "name", "description"}
OVERRIDE_KEYS = {"site", "L", "R", "B"}


class SpecError(ValueError):
    """Malformed walk file."""


def _matrix(obj, n: int, what: str) -> np.ndarray:
    try:
        m = matrix_from_json(obj)
    except (ValueError, TypeError, KeyError) as exc:
        raise SpecError(f"{what}: {exc}") from exc
    if m.shape != (n, n):
        raise SpecError(f"{what}: expected shape ({n}, {n}), got {m.shape}")
    return m


def _boundary(obj, n: int) -> BoundaryCondition:
    if obj == "absorbing":
        return BoundaryCondition.absorbing()
    if obj == "reflecting":
        return BoundaryCondition.reflecting()
    if isinstance(obj, dict) and len(obj) == 1:
        (key, val), = obj.items()
        if key == "segment":
            if not isinstance(val, int) or val < 1:
                raise SpecError("segment boundary needs a positive integer M")
            return BoundaryCondition.segment(val)
        if key == "reflecting":
            if not isinstance(val, dict) or set(val) != {"B00", "B01"}:
                raise SpecError("reflecting boundary object needs exactly B00 and B01")
            return BoundaryCondition.reflecting(_matrix(val["B00"], n, "B00"),
                                                _matrix(val["B01"], n, "B01"))
    raise SpecError(f"unrecognized boundary {obj!r}")


def rule_from_dict(d: dict) -> NearestNeighborRule:
    """Build a validated rule from a parsed walk file."""
    if not isinstance(d, dict):
        raise SpecError("walk file must hold a JSON object")
    unknown = set(d) - TOP_KEYS
    if unknown:
        raise SpecError(f"unknown walk-spec keys: {sorted(unknown)}")
    for key in ("N", "L", "R"):
        if key not in d:
            raise SpecError(f"missing key {key!r}")
    n = d["N"]
    if not isinstance(n, int) or n < 1:
        raise SpecError("N must be a positive integer")
    L = _matrix(d["L"], n, "L")
    R = _matrix(d["R"], n, "R")
    B = _matrix(d["B"], n, "B") if d.get("B") is not None else None
    boundary = _boundary(d.get("boundary", "absorbing"), n)
    overrides = {}
    for item in d.get("overrides", []):
        if not isinstance(item, dict):
            raise SpecError("override entries must be objects")
        bad = set(item) - OVERRIDE_KEYS
        if bad or "site" not in item:
            raise SpecError(f"bad override keys: {sorted(bad) or 'missing site'}")
        site = item["site"]
        lo = _matrix(item.get("L", d["L"]), n, f"override {site} L")
        ro = _matrix(item.get("R", d["R"]), n, f"override {site} R")
        bo = item.get("B", d.get("B"))
        overrides[int(site)] = (lo, None if bo is None else _matrix(bo, n, f"override {site} B"), ro)
    try:
        return NearestNeighborRule(L, R, B, boundary, overrides)
    except ValueError as exc:
        raise SpecError(str(exc)) from exc


def rule_to_dict(rule: NearestNeighborRule, name: str | None = None) -> dict:
    out = {"N": rule.N, "L": matrix_to_json(rule.L), "R": matrix_to_json(rule.R)}
    if rule.B is not None:
        out["B"] = matrix_to_json(rule.B)
    bc = rule.boundary
    if bc.kind == "segment":
        out["boundary"] = {"segment": bc.M}
    elif bc.kind == "reflecting" and bc.b00 is not None:
        out["boundary"] = {"reflecting": {"B00": matrix_to_json(bc.b00), "B01": matrix_to_json(bc.b01)}}
    else:
        out["boundary"] = bc.kind
    if rule.overrides:
        out["overrides"] = []
        for site, (l, b, r) in sorted(rule.overrides.items()):
            item = {"site": site, "L": matrix_to_json(l), "R": matrix_to_json(r)}
            if b is not None:
                item["B"] = matrix_to_json(b)
            out["overrides"].append(item)
    if name:
        out["name"] = name
    return out


def builtin_names() -> list:
    pkg = resources.files("oqwalk") / "specs"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def load_spec_dict(path_or_name: str) -> dict:
    """Read a walk spec from a file path or a bundled name such as ``"hadamard"``."""
    p = Path(path_or_name)
    if p.exists():
        text = p.read_text()
    else:
        res = resources.files("oqwalk") / "specs" / f"{path_or_name}.json"
        if not res.is_file():
            raise SpecError(f"no walk spec file or builtin named {path_or_name!r}")
        text = res.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc}") from exc


def load_rule(path_or_name: str) -> NearestNeighborRule:
    return rule_from_dict(load_spec_dict(path_or_name))

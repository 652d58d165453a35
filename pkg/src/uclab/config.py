"""Experiment configuration: parsing and validation.

A config is a JSON object with ``kind`` plus optional sections ``function``
(or ``functions``), ``lattice`` {A, generations, K}, ``thresholds``
{N, a, s, delta, eta, c, C1}, ``tolerances``, ``params`` (kind-specific),
``output`` {dir, name} and ``seed``.  Validation reports every violated
field at once.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .lattice import is_power_of_three

KINDS = (
    "doubling_index", "l2_doubling_index", "maximal_doubling", "three_spheres", "big_scale_doubling",
    "almost_monotonicity", "bad_cube_census", "hyperplane_census", "capacity_census", "width_of_bad_set",
    "sublevel_content", "effective_critical_set", "recursion_simulate", "fit_propagation_exponent",
    "weak_bound", "riesz_capacity", "hausdorff_content", "counting_bound",
)
NEEDS_FUNCTION = {
    "doubling_index", "l2_doubling_index", "maximal_doubling", "three_spheres", "big_scale_doubling",
    "bad_cube_census", "hyperplane_census", "capacity_census", "width_of_bad_set", "sublevel_content",
    "effective_critical_set",
}
NEEDS_FAMILY = {"almost_monotonicity", "fit_propagation_exponent"}
RANDOM_ZOO = {"random_harmonic", "point_charges", "random"}
SECTIONS = ("kind", "function", "functions", "lattice", "thresholds", "tolerances", "params", "output",
            "seed", "description")


class ConfigError(ValueError):
    """Every violated field, as (field path, message) pairs."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{f}: {m}" for f, m in problems))


@dataclass
class ExperimentConfig:
    kind: str
    function: dict | None = None
    functions: object = None
    lattice: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    seed: int | None = None
    description: str = ""

    def as_dict(self) -> dict:
        out = {"kind": self.kind}
        for key in SECTIONS[1:]:
            val = getattr(self, key)
            if val not in (None, {}, ""):
                out[key] = copy.deepcopy(val)
        return out

    def with_value(self, path: str, value) -> "ExperimentConfig":
        """Copy with the dotted field ``path`` set to ``value``."""
        data = self.as_dict()
        node = data
        parts = path.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
        return validate(data)

    def get(self, path: str):
        node = self.as_dict()
        for p in path.split("."):
            if not isinstance(node, dict) or p not in node:
                raise KeyError(path)
            node = node[p]
        return node


def _selectors(data: dict) -> list[dict]:
    out = []
    if isinstance(data.get("function"), dict):
        out.append(data["function"])
    fs = data.get("functions")
    if isinstance(fs, dict):
        out.append(fs)
    elif isinstance(fs, list):
        out.extend(f for f in fs if isinstance(f, dict))
    return out


def _number(problems, section: dict, name: str, path: str, lo=None, hi=None, lo_open=True, hi_open=False,
            integer=False):
    if name not in section:
        return
    v = section[name]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and not isinstance(v, int)):
        problems.append((path, f"must be {'an integer' if integer else 'a number'}, got {v!r}"))
        return
    if v != v:
        problems.append((path, "must not be NaN"))
        return
    if lo is not None and (v < lo or (lo_open and v == lo)):
        problems.append((path, f"must be {'>' if lo_open else '>='} {lo}, got {v}"))
    if hi is not None and (v > hi or (hi_open and v == hi)):
        problems.append((path, f"must be {'<' if hi_open else '<='} {hi}, got {v}"))


def validate(data: dict) -> ExperimentConfig:
    """Check every field; raise ConfigError listing all problems."""
    problems: list[tuple[str, str]] = []
    if not isinstance(data, dict):
        raise ConfigError([("<root>", "config must be a JSON object")])
    for key in data:
        if key not in SECTIONS:
            problems.append((key, "unknown field"))
    kind = data.get("kind")
    if kind not in KINDS:
        problems.append(("kind", f"must be one of {', '.join(KINDS)}; got {kind!r}"))
    for sec in ("lattice", "thresholds", "tolerances", "params", "output"):
        if sec in data and not isinstance(data[sec], dict):
            problems.append((sec, "must be an object"))
    lat = data.get("lattice", {}) if isinstance(data.get("lattice"), dict) else {}
    thr = data.get("thresholds", {}) if isinstance(data.get("thresholds"), dict) else {}
    tol = data.get("tolerances", {}) if isinstance(data.get("tolerances"), dict) else {}

    if "A" in lat:
        A = lat["A"]
        if isinstance(A, bool) or not isinstance(A, int) or A < 1:
            problems.append(("lattice.A", f"must be a positive integer, got {A!r}"))
        elif not is_power_of_three(2 * A + 1):
            problems.append(("lattice.A", f"2A+1 = {2 * A + 1} is not a power of 3 (A must be 1, 4, 13, 40, ...)"))
    _number(problems, lat, "generations", "lattice.generations", lo=1, lo_open=False, integer=True)
    if "K" in lat:
        K = lat["K"]
        if isinstance(K, bool) or not isinstance(K, int) or not is_power_of_three(K):
            problems.append(("lattice.K", f"must be a power of 3, got {K!r}"))

    if thr.get("N") != "auto":
        _number(problems, thr, "N", "thresholds.N", lo=0)
    _number(problems, thr, "a", "thresholds.a")
    _number(problems, thr, "s", "thresholds.s", lo=0)
    _number(problems, thr, "delta", "thresholds.delta", lo=0, hi=2)
    _number(problems, thr, "eta", "thresholds.eta", lo=0, hi=1)
    _number(problems, thr, "c", "thresholds.c", lo=0)
    _number(problems, thr, "C1", "thresholds.C1", lo=0)
    for name, v in tol.items():
        _number(problems, tol, name, f"tolerances.{name}", lo=0, hi=1, hi_open=True)

    if "seed" in data and data["seed"] is not None:
        if isinstance(data["seed"], bool) or not isinstance(data["seed"], int) or data["seed"] < 0:
            problems.append(("seed", f"must be a nonnegative integer, got {data['seed']!r}"))
    sels = _selectors(data)
    if kind in NEEDS_FUNCTION and not isinstance(data.get("function"), dict) and "functions" not in data:
        problems.append(("function", f"experiment {kind!r} needs a function selector"))
    if kind in NEEDS_FAMILY and "functions" not in data:
        problems.append(("functions", f"experiment {kind!r} needs a function family"))
    if any(s.get("zoo") in RANDOM_ZOO for s in sels) and data.get("seed") is None:
        problems.append(("seed", "randomised zoo generation needs a seed"))
    out = data.get("output", {})
    if isinstance(out, dict) and "name" in out:
        name = out["name"]
        if not isinstance(name, str) or not name or "/" in name or name.startswith("."):
            problems.append(("output.name", f"must be a plain file stem, got {name!r}"))
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(**{k: copy.deepcopy(v) for k, v in data.items()})


def load(path: str | Path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([("<file>", f"invalid JSON: {exc}")])
    return validate(data)

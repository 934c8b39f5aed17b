"""Scenario files: one JSON document describing a problem and what to run.

Layout (matrices as nested lists; scalars accepted as 1x1 shorthand;
signals as a number, a vector, or {"times": [...], "values": [[...], ...]}):

    {
      "problem":    {"A": ..., "B": ..., "G": ..., "Q": ..., "R": ...,
                     "Gamma": ..., "rho": ..., "f": ..., "sigma": ...,
                     "eta": ..., "init_mean": ..., "init_cov": ...},
      "horizon":    {"kind": "finite" | "infinite", "T": 20.0},
      "grid_steps": 4000,
      "simulation": {"N": 30, "replications": 64, "seed": 0},
      "sweep":      [10, 40, 160],
      "outputs":    {"dir": "out", "format": "csv"}
    }

Unknown fields are rejected.  Parsing normalizes every shorthand, so
serialize(parse(text)) is a canonical form and round-trips losslessly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingField, ParseError, UnknownField
from .model import ProblemData, build_problem

_PROBLEM_MATRICES = ("A", "B", "G", "Q", "R", "Gamma", "init_cov")
_PROBLEM_SIGNALS = ("f", "sigma", "eta")
_PROBLEM_FIELDS = set(_PROBLEM_MATRICES) | set(_PROBLEM_SIGNALS) | {
    "rho", "init_mean"}
_REQUIRED_PROBLEM = ("A", "B", "Q", "R", "rho")


def _reject_unknown(mapping: dict, allowed, where: str):
    for key in mapping:
        if key not in allowed:
            raise UnknownField(f"unknown field {key!r} in {where}")


def _norm_matrix(value, name: str):
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise ParseError(f"field {name!r} is not a matrix")
    return arr.tolist()


def _norm_vector(value, name: str):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise ParseError(f"field {name!r} is not a vector")
    return arr.tolist()


def _norm_signal(value, name: str):
    if isinstance(value, dict):
        _reject_unknown(value, {"kind", "times", "values", "value"},
                        f"problem.{name}")
        kind = value.get("kind", "table" if "times" in value else "constant")
        if kind == "constant":
            return {"kind": "constant", "value": _norm_vector(value["value"], name)}
        if kind != "table":
            raise ParseError(f"signal {name!r} has unknown kind {kind!r}")
        times = _norm_vector(value["times"], f"{name}.times")
        values = [_norm_vector(v, f"{name}.values") for v in value["values"]]
        return {"kind": "table", "times": times, "values": values}
    return {"kind": "constant", "value": _norm_vector(value, name)}


@dataclass(frozen=True)
class Scenario:
    problem: dict
    horizon_kind: str
    T: float
    grid_steps: int = 4000
    N: int | None = None
    replications: int = 64
    seed: int = 0
    sweep: tuple[int, ...] | None = None
    out_dir: str | None = None
    out_format: str = "csv"

    def build_problem(self) -> ProblemData:
        cfg = {}
        for key, val in self.problem.items():
            if key in _PROBLEM_SIGNALS:
                if val["kind"] == "constant":
                    cfg[key] = np.asarray(val["value"], dtype=float)
                else:
                    cfg[key] = {"times": val["times"], "values": val["values"]}
            else:
                cfg[key] = val
        return build_problem(cfg)


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document; all shorthand normalized."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: "
                         f"{exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be a JSON object")
    _reject_unknown(doc, {"problem", "horizon", "grid_steps", "simulation",
                          "sweep", "outputs"}, "scenario")

    if "problem" not in doc:
        raise MissingField("missing field 'problem'")
    raw_problem = doc["problem"]
    _reject_unknown(raw_problem, _PROBLEM_FIELDS, "problem")
    for name in _REQUIRED_PROBLEM:
        if name not in raw_problem:
            raise MissingField(f"missing field 'problem.{name}'")
    problem = {}
    for name, val in raw_problem.items():
        if name == "rho":
            problem[name] = float(val)
        elif name == "init_mean":
            problem[name] = _norm_vector(val, name)
        elif name in _PROBLEM_SIGNALS:
            problem[name] = _norm_signal(val, name)
        else:
            problem[name] = _norm_matrix(val, name)

    if "horizon" not in doc:
        raise MissingField("missing field 'horizon'")
    hor = doc["horizon"]
    _reject_unknown(hor, {"kind", "T"}, "horizon")
    kind = hor.get("kind")
    if kind not in ("finite", "infinite"):
        raise ParseError(f"horizon.kind must be finite|infinite, got {kind!r}")
    if "T" not in hor:
        raise MissingField("missing field 'horizon.T'")
    T = float(hor["T"])
    if T <= 0:
        raise ParseError("horizon.T must be positive")

    grid_steps = int(doc.get("grid_steps", 4000))
    if grid_steps < 2:
        raise ParseError("grid_steps must be at least 2")

    N = None
    replications = 64
    seed = 0
    if "simulation" in doc:
        sim = doc["simulation"]
        _reject_unknown(sim, {"N", "replications", "seed"}, "simulation")
        if "N" not in sim:
            raise MissingField("missing field 'simulation.N'")
        N = int(sim["N"])
        replications = int(sim.get("replications", 64))
        seed = int(sim.get("seed", 0))
        if N < 1 or replications < 1 or seed < 0:
            raise ParseError("simulation fields must be positive (seed >= 0)")

    sweep = None
    if "sweep" in doc:
        sweep = tuple(int(v) for v in doc["sweep"])
        if not sweep or any(v < 1 for v in sweep):
            raise ParseError("sweep must be a non-empty list of positive counts")

    out_dir = None
    out_format = "csv"
    if "outputs" in doc:
        outs = doc["outputs"]
        _reject_unknown(outs, {"dir", "format"}, "outputs")
        out_dir = outs.get("dir")
        out_format = outs.get("format", "csv")
        if out_format != "csv":
            raise ParseError(f"unsupported output format {out_format!r}")

    return Scenario(problem=problem, horizon_kind=kind, T=T,
                    grid_steps=grid_steps, N=N, replications=replications,
                    seed=seed, sweep=sweep, out_dir=out_dir,
                    out_format=out_format)


def serialize_scenario(sc: Scenario) -> str:
    """Canonical JSON form; parse(serialize(parse(x))) == parse(x)."""
    doc: dict = {"problem": sc.problem,
                 "horizon": {"kind": sc.horizon_kind, "T": sc.T},
                 "grid_steps": sc.grid_steps}
    if sc.N is not None:
        doc["simulation"] = {"N": sc.N, "replications": sc.replications,
                             "seed": sc.seed}
    if sc.sweep is not None:
        doc["sweep"] = list(sc.sweep)
    if sc.out_dir is not None or sc.out_format != "csv":
        doc["outputs"] = {}
        if sc.out_dir is not None:
            doc["outputs"]["dir"] = sc.out_dir
        doc["outputs"]["format"] = sc.out_format
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"

"""Scenario documents (JSON) and their validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .model import ArrivalProfile, ThermalParams

_PARAM_KEYS = {"a", "b", "c", "T_e", "T_c", "T0"}
_SOLVER_KEYS = {"grid_n", "tol", "method"}
_TOP_KEYS = {"name", "params", "D", "arrivals", "solver"}
METHODS = ("auto", "single", "multi")


class ScenarioError(ValueError):
    """Raised with every problem found, each prefixed by its field path."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class SolverOptions:
    grid_n: int = 4096
    tol: float = 1e-6
    method: str = "auto"


@dataclass
class Scenario:
    params: ThermalParams
    profile: ArrivalProfile
    T0: float
    solver: SolverOptions = field(default_factory=SolverOptions)
    name: str = "scenario"

    def to_dict(self) -> dict:
        p = self.params
        return {
            "name": self.name,
            "params": {"a": p.a, "b": p.b, "c": p.c, "T_e": p.T_e, "T_c": p.T_c, "T0": self.T0},
            "D": self.profile.D,
            "arrivals": [[t, e] for t, e in zip(self.profile.times, self.profile.energies)],
            "solver": {"grid_n": self.solver.grid_n, "tol": self.solver.tol,
                       "method": self.solver.method},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _number(value, path, problems, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        problems.append(f"{path}: expected a finite number")
        return None
    if positive and not value > 0:
        problems.append(f"{path}: must be positive")
    if nonneg and value < 0:
        problems.append(f"{path}: must be non-negative")
    return float(value)


def scenario_from_dict(doc) -> Scenario:
    problems = []
    if not isinstance(doc, dict):
        raise ScenarioError(["$: expected an object"])
    for k in sorted(set(doc) - _TOP_KEYS):
        problems.append(f"$.{k}: unknown field")
    for k in ("params", "D", "arrivals"):
        if k not in doc:
            problems.append(f"$.{k}: required")

    params_doc = doc.get("params", {})
    if not isinstance(params_doc, dict):
        problems.append("$.params: expected an object")
        params_doc = {}
    for k in sorted(set(params_doc) - _PARAM_KEYS):
        problems.append(f"$.params.{k}: unknown field")
    vals = {}
    for k in ("a", "b", "T_e", "T_c"):
        if k not in params_doc:
            if "params" in doc:
                problems.append(f"$.params.{k}: required")
            continue
        vals[k] = _number(params_doc[k], f"$.params.{k}", problems, positive=k in ("a", "b"))
    vals["c"] = _number(params_doc.get("c", 0.0), "$.params.c", problems)
    if vals.get("T_e") is not None and vals.get("T_c") is not None and not vals["T_c"] > vals["T_e"]:
        problems.append("$.params.T_c: must exceed T_e")
    T0 = None
    if "T0" in params_doc:
        T0 = _number(params_doc["T0"], "$.params.T0", problems)
        if None not in (T0, vals.get("T_e"), vals.get("T_c")) and not vals["T_e"] <= T0 <= vals["T_c"]:
            problems.append("$.params.T0: must lie in [T_e, T_c]")

    D = _number(doc["D"], "$.D", problems, positive=True) if "D" in doc else None
    times, energies = [], []
    arrivals = doc.get("arrivals", [])
    if not isinstance(arrivals, list) or ("arrivals" in doc and not arrivals):
        problems.append("$.arrivals: expected a non-empty list")
        arrivals = []
    for i, item in enumerate(arrivals):
        path = f"$.arrivals[{i}]"
        if isinstance(item, dict):
            for k in sorted(set(item) - {"t", "E"}):
                problems.append(f"{path}.{k}: unknown field")
            t, e = item.get("t"), item.get("E")
        elif isinstance(item, list) and len(item) == 2:
            t, e = item
        else:
            problems.append(f"{path}: expected [t, E] or {{\"t\", \"E\"}}")
            continue
        t = _number(t, f"{path}.t", problems, nonneg=True)
        e = _number(e, f"{path}.E", problems, nonneg=True)
        times.append(t)
        energies.append(e)
    if times and None not in times:
        if times[0] != 0.0:
            problems.append("$.arrivals[0].t: first arrival must be at 0")
        for i in range(1, len(times)):
            if not times[i] > times[i - 1]:
                problems.append(f"$.arrivals[{i}].t: arrival times must increase")
        if D is not None and times[-1] >= D:
            problems.append(f"$.arrivals[{len(times) - 1}].t: must precede the deadline D")

    solver_doc = doc.get("solver", {})
    opts = SolverOptions()
    if not isinstance(solver_doc, dict):
        problems.append("$.solver: expected an object")
        solver_doc = {}
    for k in sorted(set(solver_doc) - _SOLVER_KEYS):
        problems.append(f"$.solver.{k}: unknown field")
    if "grid_n" in solver_doc:
        g = solver_doc["grid_n"]
        if isinstance(g, bool) or not isinstance(g, int) or g < 256:
            problems.append("$.solver.grid_n: expected an integer >= 256")
        else:
            opts.grid_n = g
    if "tol" in solver_doc:
        tol = _number(solver_doc["tol"], "$.solver.tol", problems, positive=True)
        if tol is not None:
            opts.tol = tol
    if "method" in solver_doc:
        if solver_doc["method"] not in METHODS:
            problems.append(f"$.solver.method: expected one of {', '.join(METHODS)}")
        else:
            opts.method = solver_doc["method"]
    name = doc.get("name", "scenario")
    if not isinstance(name, str):
        problems.append("$.name: expected a string")

    if problems:
        raise ScenarioError(problems)
    params = ThermalParams(vals["a"], vals["b"], vals["T_e"], vals["T_c"], vals["c"])
    profile = ArrivalProfile(D, tuple(times), tuple(energies))
    return Scenario(params, profile, params.T_e if T0 is None else T0, opts, name)


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a JSON scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"$: invalid JSON ({exc.msg} at line {exc.lineno})"]) from exc
    return scenario_from_dict(doc)

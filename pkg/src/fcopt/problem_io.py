"""Problem files (JSON) and trace files (CSV).

A problem file looks like::

    {
      "name": "...",
      "dimension": 2,
      "norm": {"type": "identity"},
      "components": [{"kind": "Quadratic",
                      "parameters": {"A": [[1, 0], [0, 1]], "b": [0, 0], "c": 0},
                      "constants": {"L1": 1, "L2": 0, "sigma2": 1, "sigma3": 0}}],
      "outer": {"kind": "AdditiveComposite", "Q": {"kind": "All"}},
      "x0": [1, 1],
      "known_opt": 0.0, "x_opt": [0, 0], "D0": 1.42, "diameter": null, "R": null,
      "metadata": {...}
    }

Infinite constants are written as the string ``"inf"``.
"""

import csv
import io
import json
import math

import numpy as np

from .errors import ConfigError, DimensionError
from .linalg import NormOperator
from .methods import CompositeProblem, RunTrace
from .outer import OuterFunction
from .smooth import VectorFunction, component_from_dict

__all__ = ["load_problem", "problem_from_dict", "problem_to_dict", "save_problem",
           "trace_to_csv", "write_trace", "read_trace_csv", "TRACE_HEADER"]

TRACE_HEADER = ["k", "phi", "gap", "bound", "step_norm", "inner_iters", "subproblem_kkt"]
_OPTIONAL = ("known_opt", "x_opt", "D0", "diameter", "R")


def norm_from_dict(d, n):
    d = d or {"type": "identity"}
    kind = d.get("type", "identity")
    if kind == "identity":
        return NormOperator.identity(n)
    return NormOperator(kind, d.get("data"), n=n)


def problem_from_dict(d):
    try:
        n = int(d["dimension"])
        norm = norm_from_dict(d.get("norm"), n)
        comps = [component_from_dict(c, norm) for c in d["components"]]
        for c in comps:
            if c.n != n:
                raise DimensionError(f"component {c.kind} has dimension {c.n}, expected {n}")
        f = VectorFunction(comps, norm)
        F = OuterFunction.from_dict(d["outer"], len(comps), norm=norm)
        opt = {k: d.get(k) for k in _OPTIONAL}
        return CompositeProblem(f, F, d["x0"], name=d.get("name", ""),
                                metadata=d.get("metadata"), **opt)
    except KeyError as exc:
        raise ConfigError(f"problem file is missing field {exc}") from None


def problem_to_dict(problem):
    f, F = problem.f, problem.F
    d = {
        "name": problem.name,
        "dimension": f.n,
        "norm": f.norm.to_dict(),
        "components": [c.to_dict() for c in f.components],
        "outer": F.to_dict(),
        "x0": problem.x0.tolist(),
    }
    for k in _OPTIONAL:
        v = getattr(problem, k)
        if v is not None:
            d[k] = v.tolist() if isinstance(v, np.ndarray) else v
    if problem.metadata:
        d["metadata"] = problem.metadata
    return d


def load_problem(path):
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return problem_from_dict(d)


def save_problem(problem, path):
    with open(path, "w") as fh:
        json.dump(problem_to_dict(problem), fh, indent=1)
        fh.write("\n")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if not math.isfinite(v):
        return ""
    return repr(v)


def trace_to_csv(trace):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in trace.rows:
        w.writerow([_fmt(r[c]) for c in TRACE_HEADER])
    return buf.getvalue()


def write_trace(trace, path):
    with open(path, "w", newline="") as fh:
        fh.write(trace_to_csv(trace))


def read_trace_csv(path):
    """Rows of a trace file as dicts of floats (``None`` for empty cells)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRACE_HEADER:
            raise ConfigError(f"unexpected trace header {reader.fieldnames}")
        return [{k: (float(v) if v != "" else None) for k, v in row.items()} for row in reader]


def trace_summary(trace):
    return {"method": trace.method, "iterations": len(trace) - 1,
            "final_phi": float(trace.phi[-1]), "warnings": list(trace.warnings),
            "status": trace.status}


RunTrace.to_csv = trace_to_csv

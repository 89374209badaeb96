"""Result record shared by the sampled inequality checks."""

import json
from dataclasses import dataclass, field

import numpy as np


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if v != v:
            return "nan"
        if v in (float("inf"), float("-inf")):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


@dataclass
class CheckReport:
    """Outcome of one sampled check.

    ``max_violation`` is signed: the largest value of ``lhs - rhs - slack``
    over all samples, so a pass has ``max_violation <= 0``.
    """

    check: str
    samples: int
    max_violation: float
    passed: bool
    witness: dict = field(default_factory=dict)
    status: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            self.status = "pass" if self.passed else "fail"

    def to_dict(self):
        return _jsonable({
            "check": self.check, "status": self.status, "passed": self.passed,
            "samples": self.samples, "max_violation": self.max_violation,
            "witness": self.witness, "details": self.details,
        })

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def from_violations(check, viol, witnesses, details=None, passed=None):
    """Build a report from a vector of signed violations.

    ``witnesses`` maps names to arrays indexed like ``viol``; the worst
    sample's entries become the witness.
    """
    viol = np.asarray(viol, dtype=float)
    bad = ~np.isfinite(viol) & ~np.isneginf(viol)
    if viol.size == 0:
        return CheckReport(check, 0, -np.inf, True if passed is None else passed,
                           details=details or {})
    worst = int(np.argmax(np.where(bad, np.inf, viol)))
    mv = float(np.inf if bad[worst] else viol[worst])
    ok = (mv <= 0) if passed is None else passed
    wit = {k: np.asarray(v)[worst] for k, v in witnesses.items()}
    return CheckReport(check, int(viol.size), mv, bool(ok), wit, details=details or {})

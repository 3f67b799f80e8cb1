"""One verified identity, in a shape that serializes straight into a report."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np


def _jsonable(v):
    if v is None or isinstance(v, (bool, str)):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, (complex, np.complexfloating)):
        c = complex(v)
        return c.real if c.imag == 0 else [c.real, c.imag]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return str(v)


@dataclass
class CheckResult:
    name: str
    anchor: str
    params: dict[str, Any]
    lhs: Any
    rhs: Any
    abs_err: float
    tol: float
    status: str = ""
    wall_time: float | None = None
    note: str = ""
    suite: str = ""

    def __post_init__(self):
        self.abs_err = float(self.abs_err)
        if not self.status:
            self.status = "pass" if self.abs_err <= self.tol else "fail"

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    @classmethod
    def skipped(cls, name: str, anchor: str, params: dict, reason: str) -> "CheckResult":
        return cls(name, anchor, params, None, None, 0.0, 0.0, status="skipped", note=reason)

    def to_dict(self, timestamps: bool = True) -> dict:
        out = {
            "suite": self.suite,
            "name": self.name,
            "anchor": self.anchor,
            "params": {k: _jsonable(v) for k, v in sorted(self.params.items())},
            "lhs": None if self.lhs is None else _jsonable(self.lhs),
            "rhs": None if self.rhs is None else _jsonable(self.rhs),
            "abs_err": self.abs_err,
            "tol": self.tol,
            "status": self.status,
            "pass": self.passed,
        }
        if self.note:
            out["note"] = self.note
        if timestamps:
            out["wall_time"] = self.wall_time
        return out

    def line(self) -> str:
        return f"[{self.status.upper():7s}] {self.name} {self.params} err={self.abs_err:.3e} tol={self.tol:.1e}"


def max_abs(values) -> float:
    values = list(values)
    return max((abs(v) for v in values), default=0.0)


def check(name, anchor, params, lhs, rhs, tol, err=None, note="") -> CheckResult:
    if err is None:
        err = abs(complex(lhs) - complex(rhs))
    return CheckResult(name, anchor, dict(params), lhs, rhs, err, tol, note=note)

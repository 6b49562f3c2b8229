"""The record every verification routine returns."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class IdentityReport:
    name: str
    params: dict[str, Any] = field(default_factory=dict)
    residual: float = 0.0
    tolerance: float = 0.0
    note: str = ""
    # A shadowed check could not be evaluated inside the truncation; it neither passes nor fails.
    shadowed: bool = False

    def __post_init__(self):
        # numpy scalars leak in from residual computations and do not serialise
        object.__setattr__(self, "residual", float(self.residual))
        object.__setattr__(self, "tolerance", float(self.tolerance))

    @property
    def passed(self) -> bool:
        if self.shadowed:
            return True
        return bool(math.isfinite(self.residual) and self.residual <= self.tolerance)

    @property
    def status(self) -> str:
        if self.shadowed:
            return "shadowed"
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict[str, Any]:
        out = {
            "name": self.name,
            "params": dict(sorted(self.params.items())),
            "residual": None if self.shadowed else self.residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "status": self.status,
        }
        if self.note:
            out["note"] = self.note
        return out

    def line(self) -> str:
        params = ", ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        status = {"pass": "PASS", "fail": "FAIL", "shadowed": "SKIP"}[self.status]
        tail = f"  ({self.note})" if self.note else ""
        return f"{status}  {self.name}[{params}]  residual={self.residual:.3e}  tol={self.tolerance:.1e}{tail}"


def exact(name: str, lhs, rhs, **params) -> IdentityReport:
    """Report for an identity between exact numbers (integers or fractions)."""
    diff = abs(lhs - rhs)
    residual = 0.0 if diff == 0 else min(float(diff), 1e300)
    return IdentityReport(name, params, residual, 0.0)


def sort_key(rep: IdentityReport):
    return (rep.name, sorted((k, str(v)) for k, v in rep.params.items()))


def shadowed(name: str, note: str = "needs blocks beyond the truncation", **params) -> IdentityReport:
    return IdentityReport(name, params, float("nan"), 0.0, note=note, shadowed=True)


def all_passed(reports) -> bool:
    return all(r.passed for r in reports)

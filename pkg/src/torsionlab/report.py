"""Uniform check results shared by every module and the command line."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float = 0.0
    tolerance: float = 0.0
    invariant: str = ""
    violations: list[str] = field(default_factory=list)
    quantities: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.passed and not self.invariant:
            self.invariant = self.violations[0] if self.violations else self.name

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def as_dict(self) -> dict[str, Any]:
        out = {
            "name": self.name,
            "status": self.status,
            "residual": self.residual,
            "tolerance": self.tolerance,
        }
        if not self.passed:
            out["invariant"] = self.invariant
            out["violations"] = list(self.violations)
        if self.quantities:
            out["quantities"] = self.quantities
        return out


def residual_check(name: str, residual: float, tolerance: float, invariant: str = "",
                   **quantities) -> CheckResult:
    ok = bool(abs(residual) < tolerance)
    return CheckResult(name, ok, float(residual), tolerance, "" if ok else (invariant or name),
                       [] if ok else [invariant or name], dict(quantities))


def exact_check(name: str, violations: list[str], **quantities) -> CheckResult:
    """Integer or structural check: passes iff there are no violations."""
    return CheckResult(name, not violations, float(len(violations)), 0.0, "",
                       list(violations), dict(quantities))

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class ExperimentMessage:
    code: str
    message: str
    details: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {
            "code": self.code,
            "message": self.message,
            "details": self.details,
        }


@dataclass
class ExperimentCheck:
    name: str
    value: float | None
    threshold: str
    passed: bool

    def as_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "value": self.value,
            "threshold": self.threshold,
            "passed": self.passed,
        }


@dataclass
class ExperimentResult:
    experiment: str
    status: str = "pending"
    message: str | None = None
    outputs: list[str] = field(default_factory=list)
    metrics: dict[str, Any] = field(default_factory=dict)
    checks: list[ExperimentCheck] = field(default_factory=list)
    warnings: list[ExperimentMessage] = field(default_factory=list)
    errors: list[ExperimentMessage] = field(default_factory=list)

    def add_warning(self, code: str, message: str, **details: Any) -> None:
        self.warnings.append(ExperimentMessage(code=code, message=message, details=details))

    def add_error(self, code: str, message: str, **details: Any) -> None:
        self.errors.append(ExperimentMessage(code=code, message=message, details=details))

    def add_check(self, name: str, value: float | None, threshold: str, passed: bool) -> bool:
        self.checks.append(ExperimentCheck(name=name, value=value, threshold=threshold, passed=bool(passed)))
        return bool(passed)

    @property
    def passed(self) -> bool:
        return not self.errors and all(check.passed for check in self.checks)

    def as_dict(self) -> dict[str, Any]:
        return {
            "experiment": self.experiment,
            "status": self.status,
            "message": self.message,
            "outputs": list(self.outputs),
            "metrics": self.metrics,
            "checks": [check.as_dict() for check in self.checks],
            "warnings": [warning.as_dict() for warning in self.warnings],
            "errors": [error.as_dict() for error in self.errors],
        }

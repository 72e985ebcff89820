"""Pass/fail reports with a flat key/value text form."""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    passed: bool
    detail: str = ""


@dataclass
class VerificationReport:
    title: str
    checks: list[Check] = field(default_factory=list)

    def add(self, name: str, value: float, passed: bool, detail: str = "") -> Check:
        c = Check(name, float(value), bool(passed), detail)
        self.checks.append(c)
        return c

    def residual(self, name: str, value: float, tol: float, detail: str = "") -> Check:
        return self.add(name, value, value <= tol, detail or f"tol {tol:.1e}")

    def extend(self, other: VerificationReport, prefix: str | None = None):
        for c in other.checks:
            name = f"{prefix}.{c.name}" if prefix else c.name
            self.checks.append(Check(name, c.value, c.passed, c.detail))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def first_failure(self) -> Check | None:
        return next((c for c in self.checks if not c.passed), None)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_text(self) -> str:
        lines = [f"[{self.title}]"]
        for c in self.checks:
            lines.append(f"{c.name}.value = {c.value:.6e}")
            lines.append(f"{c.name}.pass = {'true' if c.passed else 'false'}")
            if c.detail:
                lines.append(f"{c.name}.detail = {c.detail}")
        lines.append(f"pass = {'true' if self.passed else 'false'}")
        return "\n".join(lines) + "\n"

    def __str__(self):
        return self.to_text()

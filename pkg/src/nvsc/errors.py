"""Exception types shared across the package."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Violation:
    """One itemized configuration or invariant violation."""

    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class ConfigError(ValueError):
    """Raised when a scenario or gain configuration fails validation."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class NoStabilizingSolution(ArithmeticError):
    """The Riccati problem has no stabilizing solution."""


class InfeasibleSchedule(ValueError):
    """Attack schedule parameters admit no valid schedule."""


class NumericalBlowup(RuntimeError):
    """A simulated state became non-finite."""

    def __init__(self, time: float, agent: int, term: str):
        self.time = time
        self.agent = agent
        self.term = term
        super().__init__(f"non-finite {term} for agent {agent} at t={time:.6g} s")


class UncertifiedSolution(ArithmeticError):
    """A Riccati solution exists but its residual misses the requested tolerance."""

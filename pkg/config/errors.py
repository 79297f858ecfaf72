# config/errors.py
from __future__ import annotations

from typing import Iterable, List


class SolverSuiteError(Exception):
    exit_code = 2


class InvalidInputError(SolverSuiteError, ValueError):
    exit_code = 2


class BundleFormatError(InvalidInputError):
    """Malformed instance file; carries the offending file, line and field."""

    def __init__(self, path, line: int | None, field: str, reason: str):
        self.path, self.line, self.field = str(path), line, field
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: bad {field}: {reason}")


class LayoutInfeasibleError(SolverSuiteError):
    exit_code = 3


class HypothesisViolationError(SolverSuiteError):
    exit_code = 3

    def __init__(self, violations: Iterable[str]):
        self.violations: List[str] = list(violations)
        super().__init__("hypotheses violated: " + "; ".join(self.violations))


class DomainViolationError(SolverSuiteError, ArithmeticError):
    exit_code = 3

    def __init__(self, message: str, iteration: int | None = None):
        self.iteration = iteration
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)


class NoFeasiblePointError(SolverSuiteError):
    pass


class OracleFailure(SolverSuiteError):
    exit_code = 4

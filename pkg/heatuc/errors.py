from enum import IntEnum
from typing import Any


class ExitCode(IntEnum):
    OK = 0
    INTERNAL = 1
    CASE_INVALID = 2
    INFEASIBLE = 3
    SOLVER_LIMIT = 4
    CONSISTENCY = 5
    BUDGET = 6
    USAGE = 7


class HeatUcError(Exception):
    """Base error. Every error knows the exit code the CLI should return."""

    exit_code: ExitCode = ExitCode.INTERNAL

    def __init__(self, detail: Any, exit_code: ExitCode | None = None):
        super().__init__(detail if isinstance(detail, str) else repr(detail))
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code

    def to_dict(self) -> dict:
        return {
            "error": type(self).__name__,
            "exit_code": int(self.exit_code),
            "detail": self.detail,
        }


class CaseParseError(HeatUcError):
    exit_code = ExitCode.CASE_INVALID


class SchemaVersionError(CaseParseError):
    pass


class CaseValidationError(HeatUcError):
    exit_code = ExitCode.CASE_INVALID

    def __init__(self, violations: list):
        self.violations = violations
        super().__init__([f"{v.path}: {v.message}" for v in violations])


class UnknownUnitError(HeatUcError, KeyError):
    exit_code = ExitCode.USAGE


class BiddingError(HeatUcError):
    exit_code = ExitCode.CASE_INVALID


class DispatchError(HeatUcError):
    exit_code = ExitCode.USAGE


class ModelError(HeatUcError):
    pass


class SolverError(HeatUcError):
    exit_code = ExitCode.SOLVER_LIMIT


class SolverLimitError(SolverError):
    pass


class InfeasibleClearingError(HeatUcError):
    exit_code = ExitCode.INFEASIBLE

    def __init__(self, market: str, periods: list[int], locations: list[str], message: str = ""):
        self.market = market
        self.periods = periods
        self.locations = locations
        detail = {
            "market": market,
            "periods": periods,
            "locations": locations,
            "message": message or f"{market} market infeasible",
        }
        super().__init__(detail)


class DualBoundError(HeatUcError):
    exit_code = ExitCode.SOLVER_LIMIT


class ConsistencyError(HeatUcError):
    exit_code = ExitCode.CONSISTENCY


class EnumerationBudgetError(HeatUcError):
    exit_code = ExitCode.BUDGET


class MismatchedCaseError(HeatUcError):
    exit_code = ExitCode.USAGE

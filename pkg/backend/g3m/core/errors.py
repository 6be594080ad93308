from dataclasses import dataclass

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class G3MError(Exception):
    exit_code: int = EXIT_VALIDATION

    def __init__(self, detail: str) -> None:
        super().__init__(detail)
        self.detail = detail


class InvalidInputError(G3MError, ValueError):
    """Inputs violate a documented precondition."""

    exit_code = EXIT_VALIDATION


class NumericalError(G3MError, ArithmeticError):
    """Inputs are well formed but the mathematics is undefined for them."""

    exit_code = EXIT_NUMERICAL


@dataclass(frozen=True)
class Violation:
    x: float
    t: float
    w: float


class ReplicabilityError(NumericalError):
    def __init__(self, detail: str, violations: list[Violation]) -> None:
        super().__init__(detail)
        self.violations = violations

"""
Exception hierarchy for mixgeo.

Every error carries the process exit code the CLI reports for it.
"""
from typing import Any, Dict, Optional


class MixgeoError(Exception):
    """Base class for all library errors."""
    exit_code = 3

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        """Convert the error to a dictionary."""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "details": self.details,
            "exit_code": self.exit_code,
        }


# --- Usage errors (exit 64) ---

class UsageError(MixgeoError):
    exit_code = 64


class BadConfig(UsageError):
    pass


class ParseError(UsageError):
    """Malformed loss expression; position is a 1-based column."""

    def __init__(self, position: int, message: str, text: Optional[str] = None, **details: Any):
        super().__init__(f"column {position}: {message}", position=position, text=text, **details)
        self.position = position
        self.reason = message


class UnknownLoss(UsageError):
    pass


class BadParams(UsageError):
    pass


class DimMismatch(UsageError):
    pass


class BadDirection(UsageError):
    pass


# --- Evaluation errors (exit 3) ---

class EvaluationError(MixgeoError):
    exit_code = 3


class EvalError(EvaluationError):
    """Domain fault during jet evaluation; index is the first offending sample."""

    def __init__(self, message: str, index: Optional[int] = None, **details: Any):
        super().__init__(message, index=index, **details)
        self.index = index


class OutOfDomain(EvaluationError):
    pass


class DegenerateVelocity(EvaluationError):
    pass


class QuadratureFailure(EvaluationError):
    pass


class PencilSingular(EvaluationError):
    pass


class SingularJacobian(EvaluationError):
    pass


# --- Precondition failures (exit 2) ---

class PreconditionError(MixgeoError):
    exit_code = 2


class NotProper(PreconditionError):
    pass


class NotProperHere(PreconditionError):
    pass


class NotFair(PreconditionError):
    pass


class NotMixable(PreconditionError):
    pass


class NonMonotoneLink(PreconditionError):
    pass


class NotASummand(PreconditionError):
    pass


# --- Internal consistency failures (exit 1) ---

class InvariantFailure(MixgeoError):
    exit_code = 1


class RouteDisagreement(InvariantFailure):
    pass


class SpectrumMismatch(InvariantFailure):
    pass


class ResidualImproper(InvariantFailure):
    pass

"""Errors raised by the numerical engine."""

from src.enums.exit_code import ExitCode
from src.errors.core import CoreError


class NumericalError(CoreError):
    """Base class for numerical aborts."""

    def __init__(self, message: str) -> None:
        """Initializes the error with a message."""
        super().__init__(message, ExitCode.numerical)


class NonFiniteError(NumericalError):
    """Raised when NaN or Inf appears at an op boundary or in a loss."""

    def __init__(self, where: str, additional_message: str | None = None) -> None:
        """Initializes the error naming the offending op."""
        message = f"Non-finite value produced by {where}"
        if additional_message:
            message += f": {additional_message}"
        super().__init__(message)


class ShapeError(NumericalError):
    """Raised when operand shapes do not agree."""

    def __init__(self, op: str, detail: str) -> None:
        """Initializes the error with the op and shape detail."""
        super().__init__(f"Shape mismatch in {op}: {detail}")


class GraphError(NumericalError):
    """Raised for invalid backward passes."""

    def __init__(self, detail: str) -> None:
        """Initializes the error with a detail message."""
        super().__init__(f"Invalid graph: {detail}")


class DomainError(NumericalError):
    """Raised when an op is evaluated outside its domain."""

    def __init__(self, op: str, detail: str) -> None:
        """Initializes the error with the op and detail."""
        super().__init__(f"Domain error in {op}: {detail}")

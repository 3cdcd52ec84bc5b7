"""Base error classes for the pipeline."""

from src.enums.exit_code import ExitCode


class CoreError(Exception):
    """Base class for every error the pipeline raises on purpose."""

    def __init__(self, message: str, exit_code: int) -> None:
        """Initializes the error with a message and process exit code."""
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code


class UsageError(CoreError):
    """Raised for invalid configuration, flags or operation arguments."""

    def __init__(self, additional_message: str | None = None) -> None:
        """Initializes the error with a dynamic message."""
        message = "Usage Error"
        if additional_message:
            message += f": {additional_message}"
        super().__init__(message, ExitCode.usage)


class InternalError(CoreError):
    """Raised when an unexpected exception escapes a stage."""

    def __init__(self, additional_message: str | None = None) -> None:
        """Initializes the error with a dynamic message."""
        message = "Internal Error"
        if additional_message:
            message += f": {additional_message}"
        super().__init__(message, ExitCode.usage)

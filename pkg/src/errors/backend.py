"""Errors raised while talking to a remote worker or evaluator."""

from src.enums.exit_code import ExitCode
from src.errors.core import CoreError


class BackendError(CoreError):
    """Base class for remote backend errors."""

    def __init__(self, message: str) -> None:
        """Initializes the error with a message."""
        super().__init__(message, ExitCode.data)


class BackendUnavailableError(BackendError):
    """Raised when the backend cannot be reached after all retries."""

    def __init__(self, url: str, attempts: int) -> None:
        """Initializes the error with the endpoint and attempt count."""
        super().__init__(f"Backend unavailable: {url} failed after {attempts} attempts")


class ProtocolViolationError(BackendError):
    """Raised when a response lacks fields the protocol requires."""

    def __init__(self, detail: str) -> None:
        """Initializes the error with the missing detail."""
        super().__init__(f"Protocol violation: {detail}")


class MalformedRationaleError(BackendError):
    """Raised when generated text lacks the reason/sum framing."""

    def __init__(self, detail: str) -> None:
        """Initializes the error with a detail message."""
        super().__init__(f"Malformed rationale: {detail}")

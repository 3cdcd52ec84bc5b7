"""Errors raised while reading or writing pipeline artifacts."""

from src.enums.exit_code import ExitCode
from src.errors.core import CoreError


class DataError(CoreError):
    """Base class for artifact errors."""

    def __init__(self, message: str) -> None:
        """Initializes the error with a message."""
        super().__init__(message, ExitCode.data)


class MissingArtifactError(DataError):
    """Raised when a stage input file does not exist."""

    def __init__(self, path: str) -> None:
        """Initializes the error with the missing path."""
        self.path = path
        super().__init__(f"Missing artifact: {path} does not exist")


class SchemaVersionError(DataError):
    """Raised when an artifact was written under another schema version."""

    def __init__(self, path: str, found: str, expected: str) -> None:
        """Initializes the error with both versions."""
        super().__init__(
            f"Schema version mismatch in {path}: found {found!r}, expected {expected!r}"
        )


class MalformedRecordError(DataError):
    """Raised when a line of an artifact cannot be parsed."""

    def __init__(self, path: str, line: int, reason: str) -> None:
        """Initializes the error with the 1-based line number."""
        self.line = line
        super().__init__(f"Malformed record in {path} at line {line}: {reason}")


class ProvenanceMismatchError(DataError):
    """Raised when a header's config hash does not match its embedded config."""

    def __init__(self, path: str, recorded: str, computed: str) -> None:
        """Initializes the error with both hashes."""
        super().__init__(
            f"Provenance mismatch in {path}: header hash {recorded} "
            f"but embedded config hashes to {computed}"
        )

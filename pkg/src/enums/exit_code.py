"""Process exit codes."""

from enum import IntEnum


class ExitCode(IntEnum):
    """Exit codes returned by the command line."""

    success = 0
    usage = 1
    data = 2
    numerical = 3

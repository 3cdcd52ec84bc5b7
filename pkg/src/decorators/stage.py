"""Decorator mapping stage failures onto the error hierarchy."""

import logging
from functools import wraps
from typing import Any

from pydantic import ValidationError

from src.errors.core import CoreError, InternalError, UsageError
from src.errors.data import MissingArtifactError
from src.errors.numerical import NonFiniteError

error_logger = logging.getLogger("error")


def handle_stage_exceptions(stage: str) -> callable:  # type: ignore
    """Decorator to turn anything a stage raises into a CoreError."""

    def decorator(func: callable) -> callable:  # type: ignore
        @wraps(func)
        def wrapper(*args: tuple, **kwargs: dict[str, Any]) -> Any:
            logger = error_logger
            try:
                return func(*args, **kwargs)
            except CoreError as e:
                logger.error(f"{stage} failed: {e.message}")
                raise
            except FileNotFoundError as e:
                logger.exception(f"Missing file in {stage}")
                raise MissingArtifactError(str(e.filename)) from e
            except ValidationError as e:
                logger.exception(f"Invalid input for {stage}")
                raise UsageError(f"{stage}: {e.errors()[0].get('msg')}") from e
            except FloatingPointError as e:
                logger.exception(f"Floating point error in {stage}")
                raise NonFiniteError(stage, str(e)) from e
            except Exception as e:
                logger.exception(f"Unexpected error in {stage}")
                raise InternalError(f"{stage}: {e!r}") from e

        return wrapper

    return decorator

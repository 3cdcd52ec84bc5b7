"""Decorator for remote backend calls."""

import asyncio
import logging
from functools import wraps
from typing import Any

import httpx

from src.errors.backend import BackendUnavailableError, ProtocolViolationError

request_logger = logging.getLogger("request")

RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


def retry_with_backoff(operation: str) -> callable:  # type: ignore
    """Retry a client coroutine on network failure with exponential backoff.

    Attempt count and base delay come from ``self.config`` (``max_retries``,
    ``backoff_base_s``). Exhausted retries raise BackendUnavailableError.
    """

    def decorator(func: callable) -> callable:  # type: ignore
        @wraps(func)
        async def wrapper(self, *args: tuple, **kwargs: dict[str, Any]) -> Any:
            attempts = self.config.max_retries
            for attempt in range(1, attempts + 1):
                try:
                    return await func(self, *args, **kwargs)
                except httpx.HTTPStatusError as e:
                    if e.response.status_code not in RETRYABLE_STATUS:
                        raise ProtocolViolationError(
                            f"{operation} returned HTTP {e.response.status_code}"
                        ) from e
                    request_logger.warning(
                        f"{operation} attempt {attempt}/{attempts} got HTTP "
                        f"{e.response.status_code}"
                    )
                except httpx.TransportError as e:
                    request_logger.warning(f"{operation} attempt {attempt}/{attempts} failed: {e!r}")
                if attempt < attempts:
                    await asyncio.sleep(self.config.backoff_base_s * 2 ** (attempt - 1))
            raise BackendUnavailableError(str(self.config.url), attempts)

        return wrapper

    return decorator

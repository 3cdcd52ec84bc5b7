"""Middleware configuration for the application."""

import logging
import time
from collections.abc import Callable

from fastapi import FastAPI, Request, Response
from starlette.middleware.base import BaseHTTPMiddleware

request_logger = logging.getLogger("request")

SLOW_REQUEST_S = 1.0


class RequestLoggingMiddleware(BaseHTTPMiddleware):
    """Request logging with processing time."""

    async def dispatch(self, request: Request, call_next: Callable) -> Response:
        start_time = time.perf_counter()
        method = request.method
        path = request.url.path

        request_logger.info(f"Request: {method} {path}")

        response = await call_next(request)

        process_time = time.perf_counter() - start_time
        request_logger.info(
            f"Response: {response.status_code} | Time: {process_time:.3f}s | Path: {path}"
        )
        response.headers["X-Process-Time"] = f"{process_time:.6f}"

        if process_time > SLOW_REQUEST_S:
            request_logger.warning(f"Slow request: {method} {path} took {process_time:.3f}s")

        return response


def setup_middleware(app: FastAPI) -> None:
    """Configure all middleware."""
    app.add_middleware(RequestLoggingMiddleware)

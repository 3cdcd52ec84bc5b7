"""Core task: announce the mock backend when the application starts and stops."""

from collections.abc import Callable

from fastapi import FastAPI

from src.core.logger_config import request_logger


def create_start_app_handler(app: FastAPI) -> Callable:
    """Log the workers the mock serves."""

    async def start_app() -> None:
        workers = ", ".join(sorted(app.state.mock_backend.workers))
        request_logger.info(f"Mock backend started with workers: {workers}")

    return start_app


def create_stop_app_handler(app: FastAPI) -> Callable:
    """Log shutdown."""

    async def stop_app() -> None:
        request_logger.info("Mock backend stopped")

    return stop_app

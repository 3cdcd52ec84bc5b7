"""Dependency for the mock backend."""

from fastapi import HTTPException
from starlette.requests import Request

from src.services.mock_backend_service import MockBackendService


def get_mock_backend(request: Request) -> MockBackendService:
    """Get the mock backend service from app state."""
    backend = getattr(request.app.state, "mock_backend", None)
    if backend is None:
        raise HTTPException(status_code=500, detail="Mock backend not initialized")
    return backend

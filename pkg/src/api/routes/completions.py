"""Chat completion routes."""

import logging
from typing import Annotated

from fastapi import APIRouter, Depends, status
from fastapi.responses import JSONResponse

from src.api.dependencies.backend import get_mock_backend
from src.models.wire import ChatCompletionRequest, ChatCompletionResponse
from src.services.mock_backend_service import MockBackendService

completions_router = APIRouter()

request_logger = logging.getLogger("request")


@completions_router.post(
    "/chat/completions",
    status_code=status.HTTP_200_OK,
    summary="Create chat completion",
    description="OpenAI-compatible completion answered by the synthetic judge or a worker.",
    response_model=None,
)
async def create_chat_completion(
    request: ChatCompletionRequest,
    backend: Annotated[MockBackendService, Depends(get_mock_backend)],
) -> ChatCompletionResponse | JSONResponse:
    """Answer one completion request."""
    if backend.should_fail():
        failure = backend.scripted.failure_status if backend.scripted else 503
        request_logger.warning(f"Scripted failure {failure} for {request.model}")
        return JSONResponse(status_code=failure, content={"detail": "scripted failure"})
    return backend.complete(request)

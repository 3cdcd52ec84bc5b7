"""Exception handlers for the application."""

from fastapi import FastAPI, Request, status
from fastapi.responses import JSONResponse

from src.enums.exit_code import ExitCode
from src.errors.core import CoreError

STATUS_BY_EXIT_CODE = {
    ExitCode.usage: status.HTTP_400_BAD_REQUEST,
    ExitCode.data: status.HTTP_422_UNPROCESSABLE_ENTITY,
    ExitCode.numerical: status.HTTP_500_INTERNAL_SERVER_ERROR,
}


def setup_exception_handlers(app: FastAPI) -> None:
    """Configure all exception handlers."""

    @app.exception_handler(CoreError)
    async def core_exception_handler(request: Request, exc: CoreError) -> JSONResponse:
        return JSONResponse(
            status_code=STATUS_BY_EXIT_CODE.get(exc.exit_code, status.HTTP_400_BAD_REQUEST),
            content={"detail": exc.message},
        )

"""Main module for the mock backend FastAPI application."""

import logging

from fastapi import FastAPI

from src.api.exception_handlers import setup_exception_handlers
from src.api.middleware import setup_middleware
from src.api.routes import setup_routes
from src.core import config, tasks
from src.models.config import CorpusConfig, WorkerProfile, default_workers
from src.models.corpus import ConceptCodebook
from src.models.wire import ScriptedReply
from src.services.corpus_service import CorpusService
from src.services.judge_service import SyntheticJudge
from src.services.mock_backend_service import MockBackendService
from src.services.worker_service import SyntheticWorker

request_logger = logging.getLogger("request")


def setup_event_handlers(app: FastAPI) -> None:
    """Configure all event handlers."""
    app.add_event_handler("startup", tasks.create_start_app_handler(app))
    app.add_event_handler("shutdown", tasks.create_stop_app_handler(app))


def create_app(
    codebook: ConceptCodebook | None = None,
    judge: SyntheticJudge | None = None,
    scripted: ScriptedReply | None = None,
    workers: list[WorkerProfile] | None = None,
    seed: int = 0,
) -> FastAPI:
    """Create and configure the mock backend.

    Without a codebook the default corpus world for ``seed`` is used.
    """
    app = FastAPI(title=config.PROJECT_NAME, version=config.VERSION)

    docs_url = None if config.ENV == "PROD" else "/docs"
    redoc_url = None if config.ENV == "PROD" else "/redoc"

    codebook = codebook or CorpusService.build_codebook(CorpusConfig(), seed)
    judge = judge or SyntheticJudge(codebook)
    app.state.mock_backend = MockBackendService(
        judge=judge,
        workers={
            profile.kind.value: SyntheticWorker(profile, codebook)
            for profile in (workers or default_workers())
        },
        scripted=scripted,
    )

    setup_routes(app)
    setup_middleware(app)
    setup_exception_handlers(app)
    setup_event_handlers(app)

    app.docs_url = docs_url
    app.redoc_url = redoc_url
    return app


app = create_app()

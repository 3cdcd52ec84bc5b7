"""Pytest configuration and fixtures."""

import json
from collections.abc import AsyncGenerator, Callable, Generator
from pathlib import Path
from typing import Any

import httpx
import pytest
from fastapi import FastAPI
from fastapi.testclient import TestClient

from src.api.main import create_app
from src.core.config import SCHEMA_VERSION
from src.engine.encoder import EncoderState, init_encoder
from src.enums.pool import LengthRegime, WorkerKind
from src.models.config import (
    BackendConfig,
    CorpusConfig,
    EncoderConfig,
    PoolConfig,
    WorkerProfile,
    tiny_encoder_config,
)
from src.models.core import ProvenanceHeader
from src.models.corpus import ConceptCodebook, Corpus
from src.services.corpus_service import CorpusService
from src.services.judge_service import SyntheticJudge
from src.services.third_party.backend_client import BackendClient
from src.utils.helpers import Helpers

MOCK_URL = "http://mock"

# 16 pairs split 11 train / 2 rl / 3 eval under a 50/20 split
SMALL_PIPELINE_CONFIG: dict[str, Any] = {
    "seed": 5,
    "corpus": {
        "n_pairs": 16, "n_concepts": 7, "aliases_per_side": 1, "n_fillers": 4,
        "n_distractors": 4, "n_neutral": 4, "train_percent": 50, "rl_percent": 20,
    },
    "pool": {
        "workers": [
            {"kind": "instruct", "concept_recall": 0.6, "noise_rate": 0.05,
             "length_regime": "short"},
            {"kind": "proprietary", "concept_recall": 0.9, "noise_rate": 0.1,
             "length_regime": "short"},
        ],
    },
    "encoder": {
        "vocab_size": 64, "model_dim": 8, "layer_count": 2, "head_count": 2,
        "max_seq_len": 32, "embedding_dim": 4,
    },
    "train": {"batch_size": 4, "epochs": 1, "learning_rate": 0.01},
    "rl": {
        "group_size": 2, "batch_size": 2, "epochs": 1, "max_gen": 6, "lr": 0.001,
        "length_cap": 8, "direct_bonus_steps": 1,
    },
    "eval": {"max_gen": 6, "sweep_c_values": [0.0, 0.1]},
}


@pytest.fixture
def tiny_config() -> EncoderConfig:
    """Gradient-check sized encoder config."""
    return tiny_encoder_config()


@pytest.fixture
def tiny_state(tiny_config) -> EncoderState:
    """Seeded tiny encoder."""
    return init_encoder(tiny_config, seed=0)


@pytest.fixture
def small_corpus_config() -> CorpusConfig:
    """Corpus whose token ids fit the tiny encoder's vocabulary."""
    return CorpusConfig(
        n_pairs=12,
        n_concepts=6,
        aliases_per_side=1,
        n_fillers=4,
        n_distractors=4,
        n_neutral=4,
    )


@pytest.fixture
def small_corpus(small_corpus_config) -> Corpus:
    """Seeded small corpus."""
    return CorpusService.generate_corpus(small_corpus_config, seed=3, vocab_size=64)


@pytest.fixture
def codebook(small_corpus) -> ConceptCodebook:
    """Codebook of the small corpus."""
    return small_corpus.codebook


@pytest.fixture
def judge(codebook) -> SyntheticJudge:
    """Synthetic judge over the small codebook."""
    return SyntheticJudge(codebook)


@pytest.fixture
def short_workers() -> list[WorkerProfile]:
    """Short-regime profiles whose rationales fit the tiny encoder."""
    return [
        WorkerProfile(kind=WorkerKind.instruct, concept_recall=0.6, noise_rate=0.05,
                      length_regime=LengthRegime.short),
        WorkerProfile(kind=WorkerKind.proprietary, concept_recall=0.9, noise_rate=0.1,
                      length_regime=LengthRegime.short),
    ]


@pytest.fixture
def pool_config(short_workers) -> PoolConfig:
    """Pool config with the short workers."""
    return PoolConfig(workers=short_workers)


@pytest.fixture
def header_factory() -> Callable[..., ProvenanceHeader]:
    """Build valid provenance headers."""

    def make(
        kind: str = "pairs", stage: str = "gen-corpus", config: dict[str, Any] | None = None
    ) -> ProvenanceHeader:
        config = config if config is not None else {"alpha": 1}
        return ProvenanceHeader(
            schema_version=SCHEMA_VERSION,
            kind=kind,
            stage=stage,
            seed=0,
            config_hash=Helpers.config_hash(config),
            config=config,
        )

    return make


@pytest.fixture
def out_dir(tmp_path) -> Path:
    """Output directory for pipeline artifacts."""
    return tmp_path / "out"


@pytest.fixture
def small_pipeline_config() -> dict[str, Any]:
    """Fast end-to-end config as a plain dict."""
    return json.loads(json.dumps(SMALL_PIPELINE_CONFIG))


@pytest.fixture
def config_file(tmp_path, small_pipeline_config) -> Path:
    """The fast config written to disk."""
    path = tmp_path / "small.json"
    path.write_text(json.dumps(small_pipeline_config), encoding="utf-8")
    return path


@pytest.fixture
def mock_app(codebook) -> FastAPI:
    """Mock backend over the small codebook."""
    return create_app(codebook=codebook)


@pytest.fixture
def client(mock_app) -> Generator:
    """Create test client."""
    with TestClient(mock_app) as c:
        yield c


@pytest.fixture
def backend_config() -> BackendConfig:
    """Backend settings pointing at the in-process mock, without backoff delay."""
    return BackendConfig(url=MOCK_URL, model="proprietary", max_retries=3, backoff_base_s=0.0)


@pytest.fixture
async def backend_client(mock_app, backend_config) -> AsyncGenerator[BackendClient, None]:
    """BackendClient routed into the mock app."""
    async with BackendClient(backend_config, httpx.ASGITransport(app=mock_app)) as c:
        yield c

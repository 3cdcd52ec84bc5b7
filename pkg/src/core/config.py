"""Setting up configs."""

# Third party import
from starlette.config import Config

config = Config(".env")

# Project configs
PROJECT_NAME = "Reasoning Embedder"
VERSION = "1.0"
SCHEMA_VERSION = "1"
API_PREFIX = "/v1"

# Environment
ENV = config("ENV", cast=str, default="DEV")

# Pipeline config overrides, e.g. REMB_CFG__TRAIN__EPOCHS=5
CONFIG_ENV_PREFIX = config("CONFIG_ENV_PREFIX", cast=str, default="REMB_CFG__")

# Logging
LOG_LEVEL = config("LOG_LEVEL", cast=str, default="INFO")
LOG_TO_FILE = config("LOG_TO_FILE", cast=bool, default=False)
LOG_DIR = config("LOG_DIR", cast=str, default="logs")

# Remote backend
BACKEND_URL = config("BACKEND_URL", cast=str, default=None)
BACKEND_MODEL = config("BACKEND_MODEL", cast=str, default="proprietary")
BACKEND_TIMEOUT_MS = config("BACKEND_TIMEOUT_MS", cast=int, default=30000)
BACKEND_MAX_INFLIGHT = config("BACKEND_MAX_INFLIGHT", cast=int, default=4)
MOCK_BACKEND_PORT = config("MOCK_BACKEND_PORT", cast=int, default=8808)

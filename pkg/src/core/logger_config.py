"""Log configuration module."""

import logging
import sys
from pathlib import Path

from src.core.config import LOG_DIR, LOG_LEVEL, LOG_TO_FILE


def setup_logger(name, log_file=None, level=LOG_LEVEL):
    """Setup a logger with stderr output and optional file output.

    Stdout is left to machine-readable command output.
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)
    if logger.handlers:
        return logger

    formatter = logging.Formatter(f"%(asctime)s [{name.upper()}] %(message)s")
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if LOG_TO_FILE and log_file:
        Path(LOG_DIR).mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(Path(LOG_DIR) / log_file, mode="a")
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    logger.propagate = False
    return logger


pipeline_logger = setup_logger("pipeline", "pipeline.log")
request_logger = setup_logger("request", "request.log")
error_logger = setup_logger("error", "error.log", level=logging.ERROR)

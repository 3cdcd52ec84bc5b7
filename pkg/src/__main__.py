"""Allow ``python -m src``."""

from src.cli import run

run()

"""Base Repository."""

from pathlib import Path

from src.core.config import SCHEMA_VERSION
from src.errors.data import ProvenanceMismatchError, SchemaVersionError
from src.models.core import ProvenanceHeader
from src.utils.helpers import Helpers


class BaseRepository:
    """Base class for file-backed repositories rooted at one directory."""

    def __init__(self, root: str | Path) -> None:
        """Initialize with the directory the repository reads and writes."""
        self.root = Path(root)

    def path(self, name: str) -> Path:
        return self.root / name

    @staticmethod
    def verify_header(header: ProvenanceHeader, source: str) -> None:
        """Schema version and config-hash tamper check."""
        if header.schema_version != SCHEMA_VERSION:
            raise SchemaVersionError(source, header.schema_version, SCHEMA_VERSION)
        computed = Helpers.config_hash(header.config)
        if computed != header.config_hash:
            raise ProvenanceMismatchError(source, header.config_hash, computed)

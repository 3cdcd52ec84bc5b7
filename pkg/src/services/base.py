"""Base Service."""

from src.core.config import SCHEMA_VERSION
from src.enums.artifact import ArtifactKind, Stage
from src.models.config import PipelineConfig
from src.models.core import ProvenanceHeader
from src.services.config_service import ConfigService
from src.storage.repositories.artifact import ArtifactRepository
from src.utils.helpers import Helpers


class BaseService:
    """Base Service."""

    def __init__(self, repository: ArtifactRepository, config: PipelineConfig) -> None:
        """Initialize with repository instance and the resolved config."""
        self.repository = repository
        self.config = config

    def header(self, kind: ArtifactKind, stage: Stage) -> ProvenanceHeader:
        """Provenance stamped on everything this service writes."""
        provenance = ConfigService.provenance(self.config)
        return ProvenanceHeader(
            schema_version=SCHEMA_VERSION,
            kind=kind.value,
            stage=stage.value,
            seed=self.config.seed,
            config_hash=Helpers.config_hash(provenance),
            config=provenance,
        )

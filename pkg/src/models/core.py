"""Core data that exist in all Models."""

import json
from typing import Any

from pydantic import BaseModel, ConfigDict


class CoreModel(BaseModel):
    """Any common logic to be shared by all models."""

    model_config = ConfigDict(extra="forbid")

    def to_json_line(self) -> str:
        """One-line JSON with keys in field-declaration order."""
        return json.dumps(
            self.model_dump(mode="json"),
            separators=(",", ":"),
            ensure_ascii=False,
            allow_nan=False,
        )


class ProvenanceHeader(CoreModel):
    """Header line written at the top of every artifact."""

    schema_version: str
    kind: str
    stage: str
    seed: int
    config_hash: str
    config: dict[str, Any]

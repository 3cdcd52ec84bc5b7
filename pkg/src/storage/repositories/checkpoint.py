"""Checkpoint repository: JSON manifest plus raw little-endian float64 tensors."""

import json
import logging
from pathlib import Path

import numpy as np

from src.engine import autodiff as ad
from src.engine.encoder import EXTRACTION_POINT, EncoderState
from src.errors.data import MalformedRecordError, MissingArtifactError
from src.models.config import EncoderConfig
from src.models.core import ProvenanceHeader
from src.storage.repositories.base import BaseRepository

pipeline_logger = logging.getLogger("pipeline")

MANIFEST = "manifest.json"
TENSORS = "tensors.bin"
DTYPE = "<f8"
GROUPS = ("param", "first_moment", "second_moment")


class CheckpointRepository(BaseRepository):
    """Saves and loads EncoderState directories; round trips are bit-exact."""

    def save(self, name: str, state: EncoderState, header: ProvenanceHeader) -> Path:
        directory = self.path(name)
        directory.mkdir(parents=True, exist_ok=True)
        sources = {
            "param": {k: p.value for k, p in state.params.items()},
            "first_moment": state.first_moment,
            "second_moment": state.second_moment,
        }
        directory_entries = []
        chunks = []
        offset = 0
        for group in GROUPS:
            for tensor_name, array in sources[group].items():
                data = np.ascontiguousarray(array, dtype=DTYPE).tobytes()
                directory_entries.append({
                    "name": tensor_name,
                    "group": group,
                    "shape": list(array.shape),
                    "offset": offset,
                    "length": len(data),
                })
                chunks.append(data)
                offset += len(data)
        manifest = {
            "schema_version": header.schema_version,
            "config": state.config.model_dump(mode="json"),
            "step": state.step,
            "extraction": EXTRACTION_POINT,
            "dtype": DTYPE,
            "tensors": directory_entries,
            "provenance": header.model_dump(mode="json"),
        }
        (directory / TENSORS).write_bytes(b"".join(chunks))
        (directory / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        pipeline_logger.info(f"Saved checkpoint {directory} at step {state.step}")
        return directory

    def load(self, name: str) -> tuple[EncoderState, ProvenanceHeader]:
        directory = self.path(name)
        manifest_path = directory / MANIFEST
        tensor_path = directory / TENSORS
        for required in (manifest_path, tensor_path):
            if not required.exists():
                raise MissingArtifactError(str(required))
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            header = ProvenanceHeader.model_validate(manifest["provenance"])
            config = EncoderConfig.model_validate(manifest["config"])
            entries = manifest["tensors"]
        except (json.JSONDecodeError, KeyError, ValueError) as e:
            raise MalformedRecordError(str(manifest_path), 1, str(e)) from e
        self.verify_header(header, str(manifest_path))

        blob = tensor_path.read_bytes()
        groups: dict[str, dict[str, np.ndarray]] = {g: {} for g in GROUPS}
        for entry in entries:
            start, length = entry["offset"], entry["length"]
            if start + length > len(blob):
                raise MalformedRecordError(str(tensor_path), 1, f"tensor {entry['name']} truncated")
            array = np.frombuffer(blob[start : start + length], dtype=DTYPE)
            groups[entry["group"]][entry["name"]] = array.reshape(entry["shape"]).astype(np.float64)
        params = {k: ad.parameter(v, name=k) for k, v in groups["param"].items()}
        state = EncoderState(
            config=config,
            params=params,
            first_moment=groups["first_moment"],
            second_moment=groups["second_moment"],
            step=int(manifest["step"]),
        )
        return state, header

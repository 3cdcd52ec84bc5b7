"""JSONL artifact repository."""

import csv
import io
import json
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ValidationError

from src.errors.data import MalformedRecordError, MissingArtifactError
from src.models.core import CoreModel, ProvenanceHeader
from src.storage.repositories.base import BaseRepository

pipeline_logger = logging.getLogger("pipeline")

HEADER_PREFIX = "#!"
RecordT = TypeVar("RecordT", bound=BaseModel)


class ArtifactRepository(BaseRepository):
    """Reads and writes provenance-stamped artifacts under one directory.

    Record files are UTF-8 JSONL: a ``#!`` header line, then one record per
    line with keys in model field order.
    """

    def save_records(
        self, name: str, records: Sequence[CoreModel], header: ProvenanceHeader
    ) -> Path:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [HEADER_PREFIX + header.to_json_line()]
        lines.extend(record.to_json_line() for record in records)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        pipeline_logger.info(f"Wrote {len(records)} {header.kind} records to {path}")
        return path

    def load_records(
        self, name: str, model: type[RecordT], kind: str | None = None
    ) -> tuple[ProvenanceHeader, list[RecordT]]:
        """Load every record or raise; never returns a partial load."""
        path = self.path(name)
        lines = self._read_lines(path)
        header = self._parse_header(path, lines, kind)
        records: list[RecordT] = []
        for number, line in enumerate(lines[1:], start=2):
            if not line.strip():
                raise MalformedRecordError(str(path), number, "blank line")
            try:
                records.append(model.model_validate_json(line))
            except ValidationError as e:
                raise MalformedRecordError(str(path), number, _first_error(e)) from e
        return header, records

    def save_report(self, name: str, report: CoreModel, header: ProvenanceHeader) -> Path:
        """Pretty JSON with the header under ``provenance``."""
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"provenance": header.model_dump(mode="json"), **report.model_dump(mode="json")}
        path.write_text(
            json.dumps(payload, indent=2, ensure_ascii=False, allow_nan=False) + "\n",
            encoding="utf-8",
        )
        pipeline_logger.info(f"Wrote report {path}")
        return path

    def load_report(self, name: str, model: type[RecordT]) -> tuple[ProvenanceHeader, RecordT]:
        path = self.path(name)
        if not path.exists():
            raise MissingArtifactError(str(path))
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
            header = ProvenanceHeader.model_validate(payload.pop("provenance"))
            report = model.model_validate(payload)
        except (json.JSONDecodeError, KeyError, AttributeError) as e:
            raise MalformedRecordError(str(path), 1, str(e)) from e
        except ValidationError as e:
            raise MalformedRecordError(str(path), 1, _first_error(e)) from e
        self.verify_header(header, str(path))
        return header, report

    def save_csv(
        self, name: str, columns: Sequence[str], rows: Sequence[Sequence[object]],
        header: ProvenanceHeader,
    ) -> Path:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        buffer = io.StringIO()
        buffer.write(HEADER_PREFIX + header.to_json_line() + "\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows([[repr(v) if isinstance(v, float) else v for v in row] for row in rows])
        path.write_text(buffer.getvalue(), encoding="utf-8")
        pipeline_logger.info(f"Wrote {len(rows)} rows to {path}")
        return path

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    @staticmethod
    def _read_lines(path: Path) -> list[str]:
        if not path.exists():
            raise MissingArtifactError(str(path))
        try:
            text = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as e:
            raise MalformedRecordError(str(path), 1, "not UTF-8") from e
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return lines

    def _parse_header(self, path: Path, lines: list[str], kind: str | None) -> ProvenanceHeader:
        if not lines or not lines[0].startswith(HEADER_PREFIX):
            raise MalformedRecordError(str(path), 1, "missing #! header")
        try:
            header = ProvenanceHeader.model_validate_json(lines[0][len(HEADER_PREFIX):])
        except ValidationError as e:
            raise MalformedRecordError(str(path), 1, _first_error(e)) from e
        self.verify_header(header, str(path))
        if kind is not None and header.kind != kind:
            raise MalformedRecordError(
                str(path), 1, f"expected a {kind} artifact, found {header.kind}"
            )
        return header


def _first_error(error: ValidationError) -> str:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first.get("loc", ()))
    return f"{location}: {first.get('msg')}" if location else str(first.get("msg"))

"""Config Service: resolves the pipeline config from env, file and flags."""

import json
import os
from collections.abc import Mapping
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from src.core.config import CONFIG_ENV_PREFIX
from src.errors.core import UsageError
from src.models.config import PipelineConfig
from src.utils.helpers import Helpers

NAMESPACE_SEPARATOR = "__"


class ConfigService:
    """Builds a validated PipelineConfig; precedence is defaults < env < file < flags."""

    @staticmethod
    def from_environment(
        environ: Mapping[str, str] | None = None, prefix: str = CONFIG_ENV_PREFIX
    ) -> dict[str, Any]:
        """Nested overrides from ``REMB_CFG__SECTION__KEY=value`` variables.

        Values are parsed as JSON when possible (numbers, lists, null) and
        kept as strings otherwise.
        """
        environ = os.environ if environ is None else environ
        overrides: dict[str, Any] = {}
        for name in sorted(environ):
            if not name.startswith(prefix):
                continue
            path = [part.lower() for part in name[len(prefix):].split(NAMESPACE_SEPARATOR)]
            if not all(path):
                raise UsageError(f"malformed config variable {name}")
            node = overrides
            for part in path[:-1]:
                node = node.setdefault(part, {})
                if not isinstance(node, dict):
                    raise UsageError(f"config variable {name} conflicts with another override")
            node[path[-1]] = ConfigService._parse_value(environ[name])
        return overrides

    @staticmethod
    def from_file(path: str | Path) -> dict[str, Any]:
        path = Path(path)
        if not path.exists():
            raise UsageError(f"config file {path} does not exist")
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise UsageError(f"config file {path} is not valid JSON: {e.msg}") from e
        if not isinstance(payload, dict):
            raise UsageError(f"config file {path} must hold a JSON object")
        return payload

    @staticmethod
    def load_pipeline_config(
        config_path: str | Path | None = None,
        flags: Mapping[str, Any] | None = None,
        environ: Mapping[str, str] | None = None,
    ) -> PipelineConfig:
        """Merge every layer and validate; unknown keys are a usage error."""
        merged = ConfigService.from_environment(environ)
        if config_path is not None:
            merged = Helpers.deep_merge(merged, ConfigService.from_file(config_path))
        if flags:
            merged = Helpers.deep_merge(merged, ConfigService._drop_unset(flags))
        try:
            return PipelineConfig.model_validate(merged)
        except ValidationError as e:
            first = e.errors()[0]
            location = ".".join(str(part) for part in first.get("loc", ()))
            raise UsageError(f"invalid config at {location or '<root>'}: {first['msg']}") from e

    @staticmethod
    def provenance(config: PipelineConfig) -> dict[str, Any]:
        """The config as embedded in headers; the output directory is not part of it."""
        return config.model_dump(mode="json", exclude={"out_dir"})

    @staticmethod
    def _drop_unset(flags: Mapping[str, Any]) -> dict[str, Any]:
        cleaned: dict[str, Any] = {}
        for key, value in flags.items():
            if isinstance(value, Mapping):
                nested = ConfigService._drop_unset(value)
                if nested:
                    cleaned[key] = nested
            elif value is not None:
                cleaned[key] = value
        return cleaned

    @staticmethod
    def _parse_value(raw: str) -> Any:  # noqa: ANN401
        try:
            return json.loads(raw)
        except json.JSONDecodeError:
            return raw

"""Helper functions for the project"""

import hashlib
import json
from typing import Any

import numpy as np

_SEED_MASK = (1 << 64) - 1


class Helpers:
    """Helpers class"""

    @staticmethod
    def canonical_json(payload: Any) -> str:  # noqa: ANN401
        """Serialize a JSON-compatible payload with sorted keys and no spaces."""
        return json.dumps(
            payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
        )

    @staticmethod
    def config_hash(config: dict[str, Any]) -> str:
        """First 16 hex chars of the SHA-256 of the canonical config JSON."""
        digest = hashlib.sha256(Helpers.canonical_json(config).encode("utf-8"))
        return digest.hexdigest()[:16]

    @staticmethod
    def derive_seed(seed: int, *names: object) -> int:
        """Derive an independent 64-bit seed for a named substream.

        The substream depends only on the root seed and the names, so adding
        pairs or stages never perturbs draws made under other names.
        """
        path = "/".join([str(seed & _SEED_MASK), *(str(name) for name in names)])
        digest = hashlib.sha256(path.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")

    @staticmethod
    def rng(seed: int, *names: object) -> np.random.Generator:
        """Counter-based generator for a named substream."""
        return np.random.Generator(np.random.Philox(key=Helpers.derive_seed(seed, *names)))

    @staticmethod
    def split_bucket(pair_id: str) -> int:
        """Stable bucket in [0, 100) for a pair id."""
        digest = hashlib.sha256(pair_id.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little") % 100

    @staticmethod
    def deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
        """Recursively merge ``override`` into a copy of ``base``."""
        merged = dict(base)
        for key, value in override.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key] = Helpers.deep_merge(merged[key], value)
            else:
                merged[key] = value
        return merged

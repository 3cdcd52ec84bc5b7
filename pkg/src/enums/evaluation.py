"""Evaluation enums."""

from enum import Enum


class StrategyTag(str, Enum):
    """Inference strategies compared at evaluation time."""

    adaptive = "adaptive"
    always_reason = "always_reason"
    always_direct = "always_direct"
    random_half = "random_half"
    oracle = "oracle"

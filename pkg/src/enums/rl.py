"""Adaptive reasoning enums."""

from enum import Enum


class Action(str, Enum):
    """Embedding action chosen by the policy."""

    direct = "Direct"
    reason = "Reason"

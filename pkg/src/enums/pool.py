"""Reasoning pool enums."""

from enum import Enum


class WorkerKind(str, Enum):
    """Synthetic worker families."""

    instruct = "instruct"
    thinking = "thinking"
    proprietary = "proprietary"


class LengthRegime(str, Enum):
    """Rationale length regime."""

    short = "short"
    long = "long"


class SelectionMode(str, Enum):
    """How survivor weights are derived from scored candidates."""

    counterfactual = "counterfactual"
    confidence_only = "confidence_only"
    uniform = "uniform"
    single_worker = "single_worker"

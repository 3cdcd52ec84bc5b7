"""Corpus enums."""

from enum import Enum


class Role(str, Enum):
    """Side of a query-target pair."""

    query = "query"
    target = "target"


class Modality(str, Enum):
    """Surface template of an instance."""

    text = "text"
    image = "image-like"
    video = "video-like"


class Difficulty(str, Enum):
    """Whether the pair shares surface tokens (easy) or only bridge concepts (hard)."""

    easy = "easy"
    hard = "hard"


class Split(str, Enum):
    """Dataset split."""

    train = "train"
    rl = "rl"
    eval = "eval"

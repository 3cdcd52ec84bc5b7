"""Artifact and stage enums."""

from enum import Enum


class ArtifactKind(str, Enum):
    """Kinds of JSONL artifacts."""

    pairs = "pairs"
    candidates = "candidates"
    scored = "scored"
    pool = "pool"
    utility = "utility"
    rollouts = "rollouts"
    report = "report"
    checkpoint = "checkpoint"
    sweep = "sweep"


class Stage(str, Enum):
    """Pipeline stages, one per command."""

    gen_corpus = "gen-corpus"
    gen_candidates = "gen-candidates"
    score_pool = "score-pool"
    train_joint = "train-joint"
    estimate_utility = "estimate-utility"
    train_rl = "train-rl"
    eval = "eval"
    sweep = "sweep"
    gradcheck = "gradcheck"
    analyze = "analyze"
    run_all = "run-all"

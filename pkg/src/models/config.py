"""Pipeline configuration models.

Every section rejects unknown keys. Defaults are full-scale values;
``configs/desk.json`` holds a profile that learns visibly at desk
scale.
"""

import math

from pydantic import Field, field_validator, model_validator

from src.core import config as settings
from src.enums.evaluation import StrategyTag
from src.enums.pool import LengthRegime, SelectionMode, WorkerKind
from src.models.core import CoreModel


class CorpusConfig(CoreModel):
    """Synthetic bridging-concept corpus."""

    n_pairs: int = Field(default=200, ge=2)
    hard_fraction: float = Field(default=0.5, ge=0.0, le=1.0)
    n_concepts: int = Field(default=24, ge=4)
    concepts_per_pair: int = Field(default=2, ge=1)
    aliases_per_side: int = Field(default=2, ge=1)
    n_fillers: int = Field(default=24, ge=1)
    n_distractors: int = Field(default=24, ge=1)
    n_neutral: int = Field(default=16, ge=1)
    train_percent: int = Field(default=70, ge=0, le=100)
    rl_percent: int = Field(default=10, ge=0, le=100)

    @model_validator(mode="after")
    def check_pairs_fit(self) -> "CorpusConfig":
        """Each pair needs its own concept set."""
        if self.concepts_per_pair > self.n_concepts:
            raise ValueError("concepts_per_pair exceeds n_concepts")
        if self.n_pairs > math.comb(self.n_concepts, self.concepts_per_pair):
            raise ValueError("not enough distinct concept sets for n_pairs")
        if self.train_percent + self.rl_percent > 100:
            raise ValueError("train_percent + rl_percent exceeds 100")
        return self


class WorkerProfile(CoreModel):
    """Synthetic worker parameters."""

    kind: WorkerKind
    concept_recall: float = Field(ge=0.0, le=1.0)
    noise_rate: float = Field(ge=0.0)
    length_regime: LengthRegime


def default_workers() -> list[WorkerProfile]:
    """Instruct, thinking and proprietary profiles."""
    return [
        WorkerProfile(kind=WorkerKind.instruct, concept_recall=0.6, noise_rate=0.05,
                      length_regime=LengthRegime.short),
        WorkerProfile(kind=WorkerKind.thinking, concept_recall=0.75, noise_rate=0.5,
                      length_regime=LengthRegime.long),
        WorkerProfile(kind=WorkerKind.proprietary, concept_recall=0.9, noise_rate=0.1,
                      length_regime=LengthRegime.short),
    ]


class BackendConfig(CoreModel):
    """Remote worker/evaluator endpoint."""

    url: str | None = settings.BACKEND_URL
    model: str = settings.BACKEND_MODEL
    timeout_ms: int = Field(default=settings.BACKEND_TIMEOUT_MS, gt=0)
    max_inflight: int = Field(default=settings.BACKEND_MAX_INFLIGHT, ge=1)
    max_retries: int = Field(default=3, ge=1)
    backoff_base_s: float = Field(default=0.25, ge=0.0)


class PoolConfig(CoreModel):
    """Candidate generation and counterfactual selection."""

    epsilon: float = -0.1
    gamma: float = Field(default=1.0, gt=0.0)
    candidates_per_worker: int = Field(default=1, ge=1)
    workers: list[WorkerProfile] = Field(default_factory=default_workers, min_length=1)
    selection: SelectionMode = SelectionMode.counterfactual
    distractor_penalty: float = Field(default=0.02, ge=0.0)
    score_threads: int = Field(default=1, ge=1)
    backend: BackendConfig = Field(default_factory=BackendConfig)


class EncoderConfig(CoreModel):
    """Toy causal encoder."""

    vocab_size: int = Field(default=512, ge=16)
    model_dim: int = Field(default=32, ge=2)
    layer_count: int = Field(default=2, ge=1)
    head_count: int = Field(default=2, ge=1)
    max_seq_len: int = Field(default=256, ge=4)
    embedding_dim: int = Field(default=16, ge=1)
    ffn_multiplier: int = Field(default=4, ge=1)

    @model_validator(mode="after")
    def check_heads(self) -> "EncoderConfig":
        """model_dim must split evenly across heads."""
        if self.model_dim % self.head_count:
            raise ValueError("model_dim must be divisible by head_count")
        return self


def tiny_encoder_config() -> EncoderConfig:
    """Gradient-check sized encoder (about 3k parameters)."""
    return EncoderConfig(
        vocab_size=64, model_dim=8, layer_count=2, head_count=2, max_seq_len=32,
        embedding_dim=4, ffn_multiplier=4,
    )


class LossWeights(CoreModel):
    """Weights of the joint objective."""

    tau: float = Field(default=0.05, gt=0.0)
    lambda_reason: float = Field(default=1.0, ge=0.0)
    lambda_cot: float = Field(default=1.0, ge=0.0)
    lambda_direct: float = Field(default=1.0, ge=0.0)


class TrainConfig(CoreModel):
    """Joint contrastive + chain-of-thought training."""

    batch_size: int = Field(default=32, ge=2)
    epochs: int = Field(default=3, ge=0)
    learning_rate: float = Field(default=5e-5, gt=0.0)
    warmup_ratio: float = Field(default=0.03, ge=0.0, le=1.0)
    empty_injection_prob: float = Field(default=0.1, ge=0.0, le=1.0)
    weight_decay: float = Field(default=0.0, ge=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    loss: LossWeights = Field(default_factory=LossWeights)


class RLConfig(CoreModel):
    """Adaptive reasoning with group-relative policy optimization."""

    group_size: int = Field(default=8, ge=2)
    batch_size: int = Field(default=8, ge=1)
    alpha: float = 0.2
    direct_bonus_steps: int = Field(default=500, ge=0)
    cost_coeff: float = Field(default=1e-3, ge=0.0)
    long_penalty_multiplier: float = Field(default=2.0, ge=0.0)
    length_cap: int | None = Field(default=512, ge=1)
    clip_low: float = Field(default=0.8, ge=0.0)
    clip_high: float = Field(default=1.28)
    kl_beta: float = Field(default=0.04, ge=0.0)
    max_gen: int = Field(default=1024, ge=1, le=1024)
    temperature: float = Field(default=1.0, gt=0.0)
    lr: float = Field(default=1e-6, gt=0.0)
    epochs: int = Field(default=2, ge=0)
    recompute_delta: bool = False
    rollout_threads: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def check_clip(self) -> "RLConfig":
        """clip_low < 1 < clip_high."""
        if not self.clip_low < 1.0 < self.clip_high:
            raise ValueError("clip range must satisfy clip_low < 1 < clip_high")
        return self


class EvalConfig(CoreModel):
    """Evaluation and sweep."""

    strategies: list[StrategyTag] = Field(default_factory=lambda: list(StrategyTag))
    max_gen: int = Field(default=64, ge=1, le=1024)
    sweep_c_values: list[float] = Field(default_factory=lambda: [0.0, 1e-3, 1e-2, 5e-2, 2e-1])

    @field_validator("sweep_c_values")
    @classmethod
    def check_sorted(cls, v: list[float]) -> list[float]:
        """Sweep values must be ascending."""
        if v != sorted(v):
            raise ValueError("sweep_c_values must be sorted ascending")
        return v


class PipelineConfig(CoreModel):
    """Everything a run needs, serialized into every output header."""

    seed: int = Field(default=0, ge=0, lt=2**64)
    out_dir: str = "out"
    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    pool: PoolConfig = Field(default_factory=PoolConfig)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    rl: RLConfig = Field(default_factory=RLConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

"""Adaptive reasoning models."""

from pydantic import Field, model_validator

from src.enums.corpus import Difficulty, Role
from src.enums.rl import Action
from src.enums.tokens import SpecialToken
from src.models.core import CoreModel


class UtilityRecord(CoreModel):
    """Direct vs reasoning similarity of one positive pair."""

    pair_id: str
    difficulty: Difficulty
    s_direct: float = Field(ge=-1.0 - 1e-9, le=1.0 + 1e-9)
    s_reason: float | None = Field(default=None, ge=-1.0 - 1e-9, le=1.0 + 1e-9)
    delta: float | None = None

    @model_validator(mode="after")
    def check_delta(self) -> "UtilityRecord":
        """delta is s_reason - s_direct exactly, absent with s_reason."""
        if self.s_reason is None:
            if self.delta is not None:
                raise ValueError("delta requires s_reason")
        elif self.delta != self.s_reason - self.s_direct:
            raise ValueError("delta must equal s_reason - s_direct")
        return self


class UtilitySummary(CoreModel):
    count: int
    undefined: int
    fraction_positive: float
    mean_delta: float
    mean_delta_by_difficulty: dict[Difficulty, float]


class ActionOutcome(CoreModel):
    """One sampled completion, classified."""

    action: Action
    rationale_tokens: list[int]
    length: int = Field(ge=0)
    format_ok: bool
    truncated: bool = False

    @model_validator(mode="after")
    def check_action(self) -> "ActionOutcome":
        """Direct is exactly [<empty>] with length 0; Reason is nonempty."""
        if self.action == Action.direct:
            if self.rationale_tokens != [SpecialToken.empty.value] or self.length != 0:
                raise ValueError("Direct outcome must be exactly [<empty>] with length 0")
        elif not self.rationale_tokens:
            raise ValueError("Reason outcome needs a nonempty rationale")
        return self


class RewardBreakdown(CoreModel):
    r_ada: float
    r_format: float
    r_emb: float
    total: float

    @classmethod
    def of(cls, r_ada: float, r_format: float, r_emb: float) -> "RewardBreakdown":
        return cls(r_ada=r_ada, r_format=r_format, r_emb=r_emb, total=r_ada + r_format + r_emb)


class RolloutGroup(CoreModel):
    """G completions for one instance with everything the update needs."""

    pair_id: str
    side: Role
    outcomes: list[ActionOutcome]
    rewards: list[RewardBreakdown]
    advantages: list[float]
    old_logprobs: list[list[float]]
    ref_logprobs: list[list[float]]


class RolloutRecord(CoreModel):
    """One line of rollouts.jsonl."""

    step: int
    pair_id: str
    side: Role
    index: int
    action: Action
    tokens: list[int]
    length: int
    format_ok: bool
    delta: float | None
    reward: RewardBreakdown
    advantage: float


class RLStepLog(CoreModel):
    step: int
    pairs: int
    mean_reward: float
    reasoning_ratio: float
    surrogate: float
    grad_norm: float


class RLReport(CoreModel):
    epochs: int = 0
    steps: list[RLStepLog] = Field(default_factory=list)
    skipped_pairs: list[str] = Field(default_factory=list)
    final_checkpoint: str | None = None
    cost_coeff: float = 0.0
    length_cap: int | None = None

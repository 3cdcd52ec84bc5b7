"""Reasoning pool models."""

from pydantic import Field, model_validator

from src.enums.corpus import Role
from src.models.core import CoreModel
from src.utils.formatters import Formatters
from src.utils.validators import Validators


class RationaleCandidate(CoreModel):
    """A single-sided rationale from one worker."""

    candidate_id: str
    pair_id: str
    source: str
    side: Role
    tokens: list[int]

    @model_validator(mode="after")
    def check_framing(self) -> "RationaleCandidate":
        """<reason> body </reason> <sum> summary, each framing token once."""
        if not Validators.is_framed_candidate(self.tokens):
            raise ValueError(f"candidate {self.candidate_id} is not framed")
        return self

    @property
    def encoder_tokens(self) -> list[int]:
        """The <reason> ... </reason> part the encoder consumes."""
        return Formatters.encoder_part(self.tokens)


class ScoredRationale(CoreModel):
    """A candidate with its counterfactual gain and selection weight."""

    candidate: RationaleCandidate
    c0: float
    cr: float
    delta: float
    weight: float | None = Field(default=None, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def check_delta(self) -> "ScoredRationale":
        """delta is exactly cr - c0."""
        if self.delta != self.cr - self.c0:
            raise ValueError("delta must equal cr - c0")
        return self


class ReasoningPoolEntry(CoreModel):
    """One supervision tuple of the weighted pool."""

    pair_id: str
    query_rationale: ScoredRationale | None = None
    target_rationale: ScoredRationale | None = None
    weight: float = Field(gt=0.0, le=1.0)
    direct_only: bool = False

    @model_validator(mode="after")
    def check_sides(self) -> "ReasoningPoolEntry":
        """Either both sides carry a rationale or the entry is direct-only."""
        has_both = self.query_rationale is not None and self.target_rationale is not None
        if self.direct_only == has_both:
            raise ValueError("entry must be direct-only or carry both rationales")
        return self

    def rationale_tokens(self, side: Role) -> list[int] | None:
        """Encoder tokens for one side, None when direct-only."""
        scored = self.query_rationale if side == Role.query else self.target_rationale
        return None if scored is None else scored.candidate.encoder_tokens


class PoolBuild(CoreModel):
    """Everything build_pool produces."""

    candidates: list[RationaleCandidate]
    scored: list[ScoredRationale]
    entries: list[ReasoningPoolEntry]

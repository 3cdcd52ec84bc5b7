"""Evaluation and analysis report models."""

from pydantic import Field

from src.enums.corpus import Difficulty
from src.enums.evaluation import StrategyTag
from src.models.core import CoreModel


class StratumMetrics(CoreModel):
    queries: int = Field(ge=0)
    hit_at_1: float = Field(ge=0.0, le=1.0)
    ndcg_at_5: float = Field(ge=0.0, le=1.0)
    reasoning_ratio: float = Field(ge=0.0, le=1.0)
    token_latency_proxy: int = Field(ge=0)


class MetricReport(CoreModel):
    """Retrieval quality and generation cost of one strategy."""

    strategy: StrategyTag
    queries: int = Field(ge=0)
    candidates: int = Field(ge=0)
    hit_at_1: float = Field(ge=0.0, le=1.0)
    ndcg_at_5: float = Field(ge=0.0, le=1.0)
    reasoning_ratio: float = Field(ge=0.0, le=1.0)
    token_latency_proxy: int = Field(ge=0)
    by_difficulty: dict[Difficulty, StratumMetrics] = Field(default_factory=dict)


class EvalReport(CoreModel):
    checkpoint: str
    metrics: list[MetricReport]

    def by_strategy(self, strategy: StrategyTag) -> MetricReport:
        return next(m for m in self.metrics if m.strategy == strategy)


class SweepRow(CoreModel):
    c: float
    reasoning_ratio: float
    hit_at_1: float


class GainSummary(CoreModel):
    """Distribution of one group of values (gains per worker, or utilities)."""

    group: str
    count: int
    mean: float
    median: float
    q25: float
    q75: float
    fraction_below_zero: float
    fraction_above_epsilon: float | None = None


class AnalysisReport(CoreModel):
    gains: list[GainSummary] = Field(default_factory=list)
    utility: list[GainSummary] = Field(default_factory=list)
    mean_weight_by_source: dict[str, float] = Field(default_factory=dict)
    figures: list[str] = Field(default_factory=list)

"""Eval Service: retrieval metrics, inference strategies and the cost sweep."""

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from src.engine import autodiff as ad
from src.engine.encoder import (
    EncoderState,
    embed_with_reasoning,
    next_token_logits,
    sample_rationale,
)
from src.engine.objectives import EMPTY_RATIONALE
from src.enums.corpus import Difficulty
from src.enums.evaluation import StrategyTag
from src.enums.rl import Action
from src.enums.tokens import SpecialToken
from src.errors.core import UsageError
from src.models.config import EvalConfig, RLConfig
from src.models.corpus import Instance, PairRecord
from src.models.report import MetricReport, StratumMetrics, SweepRow
from src.models.rl import UtilityRecord
from src.services.rl_service import RLService
from src.utils.formatters import Formatters
from src.utils.helpers import Helpers

pipeline_logger = logging.getLogger("pipeline")

NDCG_DEPTH = 5


@dataclass(frozen=True)
class Embedded:
    """An instance embedded under one action."""

    vector: np.ndarray
    action: Action
    generated: int


class EmbeddingCache:
    """Direct, forced-reason and greedy-decision embeddings, computed once per instance."""

    def __init__(self, state: EncoderState, max_gen: int) -> None:
        """Bind the checkpoint and generation limit."""
        self.state = state
        self.max_gen = max_gen
        self._direct: dict[str, Embedded] = {}
        self._reason: dict[str, Embedded] = {}
        self._first: dict[str, Action] = {}

    def direct(self, instance: Instance) -> Embedded:
        if instance.id not in self._direct:
            x = Formatters.direct_input(instance.tokens)
            with ad.no_grad():
                z = embed_with_reasoning(self.state, x, EMPTY_RATIONALE)
            self._direct[instance.id] = Embedded(z.value.copy(), Action.direct, 0)
        return self._direct[instance.id]

    def reason(self, instance: Instance) -> Embedded:
        """Greedy continuation after a forced <reason>."""
        if instance.id not in self._reason:
            x = Formatters.direct_input(instance.tokens)
            room = self.state.config.max_seq_len - len(x) - 1
            sample = sample_rationale(
                self.state, x, temperature=0.0, max_new=max(1, min(self.max_gen, room)),
                seed=0, force_first=SpecialToken.reason.value,
            )
            with ad.no_grad():
                z = embed_with_reasoning(self.state, x, sample.tokens)
            self._reason[instance.id] = Embedded(z.value.copy(), Action.reason, len(sample.tokens))
        return self._reason[instance.id]

    def adaptive(self, instance: Instance) -> Embedded:
        """The policy's greedy first token decides: <empty> means Direct."""
        if instance.id not in self._first:
            logits = next_token_logits(self.state, Formatters.direct_input(instance.tokens))
            first = int(np.argmax(logits))
            self._first[instance.id] = Action.direct if first == SpecialToken.empty \
                else Action.reason
        if self._first[instance.id] == Action.direct:
            return self.direct(instance)
        return self.reason(instance)

    def by_action(self, instance: Instance, action: Action) -> Embedded:
        return self.direct(instance) if action == Action.direct else self.reason(instance)


class EvalService:
    """Retrieval evaluation over the eval split."""

    @staticmethod
    def rank(candidate_ids: Sequence[str], scores: Sequence[float]) -> list[str]:
        """Descending score; ties keep candidate order."""
        order = sorted(range(len(candidate_ids)), key=lambda i: (-scores[i], i))
        return [candidate_ids[i] for i in order]

    @staticmethod
    def hit_at_1(ranked_ids: Sequence[str], positive_id: str) -> int:
        if not ranked_ids:
            raise UsageError("candidate list is empty")
        if positive_id not in ranked_ids:
            raise UsageError(f"positive {positive_id} is not among the candidates")
        return int(ranked_ids[0] == positive_id)

    @staticmethod
    def ndcg_at_5(ranked_ids: Sequence[str], relevance: Mapping[str, float]) -> float:
        """Linear-gain NDCG over the first five ranks; 0 when nothing is relevant."""
        if any(v < 0 for v in relevance.values()):
            raise UsageError("relevance must be non-negative")

        def dcg(gains: Sequence[float]) -> float:
            return math.fsum(g / math.log2(i + 2) for i, g in enumerate(gains[:NDCG_DEPTH]))

        ideal = dcg(sorted(relevance.values(), reverse=True))
        if ideal == 0:
            return 0.0
        return dcg([relevance.get(i, 0.0) for i in ranked_ids]) / ideal

    @staticmethod
    def query_choices(
        cache: EmbeddingCache,
        pairs: Sequence[PairRecord],
        strategy: StrategyTag,
        targets: np.ndarray,
        seed: int,
    ) -> list[Embedded]:
        """Embedding of every query under ``strategy`` against fixed target embeddings."""
        choices = []
        for k, pair in enumerate(pairs):
            q = pair.query
            if strategy == StrategyTag.always_direct:
                choices.append(cache.direct(q))
            elif strategy == StrategyTag.always_reason:
                choices.append(cache.reason(q))
            elif strategy == StrategyTag.random_half:
                coin = Helpers.rng(seed, "random-half", q.id).random()
                choices.append(cache.by_action(q, Action.reason if coin < 0.5 else Action.direct))
            elif strategy == StrategyTag.adaptive:
                choices.append(cache.adaptive(q))
            else:
                direct, reason = cache.direct(q), cache.reason(q)
                choices.append(
                    reason if EvalService._oracle_prefers(reason, direct, targets, k) else direct
                )
        return choices

    @staticmethod
    def _oracle_prefers(reason: Embedded, direct: Embedded, targets: np.ndarray, k: int) -> bool:
        """Whether Reason ranks the true target strictly better (ties: higher cosine)."""

        def position(vector: np.ndarray) -> tuple[int, float]:
            scores = targets @ vector
            order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
            return order.index(k), float(scores[k])

        pos_r, sim_r = position(reason.vector)
        pos_d, sim_d = position(direct.vector)
        return pos_r < pos_d or (pos_r == pos_d and sim_r > sim_d)

    @staticmethod
    def target_choices(
        cache: EmbeddingCache, pairs: Sequence[PairRecord], strategy: StrategyTag, seed: int
    ) -> list[Embedded]:
        choices = []
        for pair in pairs:
            t = pair.target
            if strategy == StrategyTag.always_direct:
                choices.append(cache.direct(t))
            elif strategy == StrategyTag.always_reason:
                choices.append(cache.reason(t))
            elif strategy == StrategyTag.random_half:
                coin = Helpers.rng(seed, "random-half", t.id).random()
                choices.append(cache.by_action(t, Action.reason if coin < 0.5 else Action.direct))
            else:
                choices.append(cache.adaptive(t))
        return choices

    @staticmethod
    def evaluate(
        state: EncoderState,
        pairs: Sequence[PairRecord],
        strategy: StrategyTag,
        seed: int,
        max_gen: int = 64,
        cache: EmbeddingCache | None = None,
    ) -> MetricReport:
        """Every query ranked against all eval targets under one strategy."""
        if not pairs:
            raise UsageError("evaluation needs at least one pair")
        cache = cache or EmbeddingCache(state, max_gen)
        target_embs = EvalService.target_choices(cache, pairs, strategy, seed)
        targets = np.stack([t.vector for t in target_embs])
        query_embs = EvalService.query_choices(cache, pairs, strategy, targets, seed)
        target_ids = [p.target.id for p in pairs]

        rows = []
        for k, (pair, query) in enumerate(zip(pairs, query_embs, strict=True)):
            ranked = EvalService.rank(target_ids, list(targets @ query.vector))
            rows.append({
                "difficulty": pair.difficulty,
                "hit": EvalService.hit_at_1(ranked, target_ids[k]),
                "ndcg": EvalService.ndcg_at_5(ranked, {target_ids[k]: 1.0}),
                "reason": int(query.action == Action.reason)
                + int(target_embs[k].action == Action.reason),
                "tokens": query.generated + target_embs[k].generated,
            })

        def stratum(selected: list[dict]) -> StratumMetrics:
            return StratumMetrics(
                queries=len(selected),
                hit_at_1=float(np.mean([r["hit"] for r in selected])),
                ndcg_at_5=min(1.0, float(np.mean([r["ndcg"] for r in selected]))),
                reasoning_ratio=sum(r["reason"] for r in selected) / (2 * len(selected)),
                token_latency_proxy=sum(r["tokens"] for r in selected),
            )

        overall = stratum(rows)
        by_difficulty = {
            d: stratum([r for r in rows if r["difficulty"] == d])
            for d in Difficulty
            if any(r["difficulty"] == d for r in rows)
        }
        report = MetricReport(
            strategy=strategy,
            candidates=len(target_ids),
            by_difficulty=by_difficulty,
            **overall.model_dump(),
        )
        pipeline_logger.info(
            f"{strategy.value}: hit@1 {report.hit_at_1:.3f}, ndcg@5 {report.ndcg_at_5:.3f}, "
            f"reasoning {report.reasoning_ratio:.2f}, tokens {report.token_latency_proxy}"
        )
        return report

    @staticmethod
    def evaluate_all(
        state: EncoderState, pairs: Sequence[PairRecord], config: EvalConfig, seed: int
    ) -> list[MetricReport]:
        """All configured strategies over one shared embedding cache."""
        cache = EmbeddingCache(state, config.max_gen)
        return [
            EvalService.evaluate(state, pairs, strategy, seed, config.max_gen, cache)
            for strategy in config.strategies
        ]

    @staticmethod
    def sweep_cost_coeff(
        state: EncoderState,
        rl_pairs: Sequence[PairRecord],
        utilities: Sequence[UtilityRecord],
        eval_pairs: Sequence[PairRecord],
        c_values: Sequence[float],
        rl_config: RLConfig,
        eval_config: EvalConfig,
        seed: int,
    ) -> list[SweepRow]:
        """Retrain RL from the same checkpoint per cost coefficient, without a length cap."""
        if list(c_values) != sorted(c_values):
            raise UsageError("c_values must be sorted ascending")
        rows = []
        for c in c_values:
            config = rl_config.model_copy(update={"cost_coeff": c, "length_cap": None})
            policy, _, _ = RLService.train_rl(state.clone(), rl_pairs, utilities, config, seed)
            report = EvalService.evaluate(policy, eval_pairs, StrategyTag.adaptive, seed,
                                          eval_config.max_gen)
            rows.append(SweepRow(c=c, reasoning_ratio=report.reasoning_ratio,
                                 hit_at_1=report.hit_at_1))
            pipeline_logger.info(
                f"Sweep c={c:g}: reasoning {report.reasoning_ratio:.2f}, hit@1 {report.hit_at_1:.3f}"
            )
        return rows

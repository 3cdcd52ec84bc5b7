"""Reward Service: adaptive, format and embedding rewards plus group advantages."""

from collections.abc import Sequence

import numpy as np

from src.enums.rl import Action
from src.errors.core import UsageError
from src.models.config import RLConfig
from src.models.rl import ActionOutcome
from src.utils.validators import Validators

STD_FLOOR = 1e-12


class RewardService:
    """Pure reward functions."""

    @staticmethod
    def length_cost(length: int, config: RLConfig) -> float:
        """c * L up to the cap, slope kappa * c beyond it; continuous at the cap."""
        c = config.cost_coeff
        cap = config.length_cap
        if cap is None or length <= cap:
            return c * length
        return c * cap + config.long_penalty_multiplier * c * (length - cap)

    @staticmethod
    def reward_ada(outcome: ActionOutcome, delta: float, step: int, config: RLConfig) -> float:
        """Direct earns alpha during the first ``direct_bonus_steps`` updates; Reason earns delta - cost."""
        if outcome.action == Action.direct:
            return config.alpha if step <= config.direct_bonus_steps else 0.0
        return delta - RewardService.length_cost(outcome.length, config)

    @staticmethod
    def reward_format(outcome: ActionOutcome) -> float:
        if outcome.truncated:
            return 0.0
        return 1.0 if Validators.is_well_formed_rationale(outcome.rationale_tokens) else 0.0

    @staticmethod
    def direction_reward(positive: Sequence[float], negative: Sequence[float]) -> float:
        """|S+ in top_G(S+ u S-)| / G * (mean(S+) - mean(S-)).

        Ties at the top-G boundary prefer members of S+.
        """
        g = len(positive)
        if g == 0 or len(negative) != g:
            raise UsageError("direction reward needs G >= 1 similarities on each side")
        pooled = [(float(v), 0) for v in positive] + [(float(v), 1) for v in negative]
        pooled.sort(key=lambda item: (-item[0], item[1]))
        overlap = sum(1 for _, label in pooled[:g] if label == 0) / g
        gap = float(np.mean(positive)) - float(np.mean(negative))
        return overlap * gap

    @staticmethod
    def reward_emb(
        query_embs: np.ndarray,
        target_pos_embs: np.ndarray,
        target_neg_embs: np.ndarray,
        query_neg_embs: np.ndarray,
    ) -> list[float]:
        """Symmetric embedding reward for each of G completion indices.

        Rows are unit embeddings of an instance with each of its G completions.
        The query direction ranks positive against negative targets; the target
        direction ranks the positive query against the negative pair's query.
        """
        g = query_embs.shape[0]
        if g == 0:
            raise UsageError("reward_emb needs G >= 1")
        for block in (target_pos_embs, target_neg_embs, query_neg_embs):
            if block.shape != query_embs.shape:
                raise UsageError("all completion blocks must share shape (G, d)")
        q_pos, q_neg = query_embs @ target_pos_embs.T, query_embs @ target_neg_embs.T
        t_pos, t_neg = target_pos_embs @ query_embs.T, target_pos_embs @ query_neg_embs.T
        rewards = []
        for i in range(g):
            forward = RewardService.direction_reward(q_pos[i], q_neg[i])
            backward = RewardService.direction_reward(t_pos[i], t_neg[i])
            rewards.append(0.5 * (forward + backward))
        return rewards

    @staticmethod
    def grpo_advantages(rewards: Sequence[float]) -> list[float]:
        """(R - mean) / population std within the group; zeros when std < 1e-12."""
        if len(rewards) < 2:
            raise UsageError("group relative advantages need G >= 2")
        values = np.asarray(rewards, dtype=np.float64)
        std = float(values.std())
        if std < STD_FLOOR:
            return [0.0] * len(values)
        return [float(v) for v in (values - values.mean()) / std]

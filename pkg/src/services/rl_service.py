"""RL Service: utility estimation and group-relative policy optimization."""

import logging
from collections import defaultdict
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from src.engine import autodiff as ad
from src.engine.autodiff import Node
from src.engine.encoder import (
    EncoderState,
    cosine,
    embed_direct,
    embed_with_reasoning,
    encode,
    sample_rationale,
    token_logprobs,
)
from src.engine.objectives import EMPTY_RATIONALE
from src.engine.optim import adam_step
from src.enums.corpus import Difficulty, Role
from src.enums.rl import Action
from src.errors.core import UsageError
from src.errors.numerical import NonFiniteError
from src.models.config import RLConfig
from src.models.core import ProvenanceHeader
from src.models.corpus import PairRecord
from src.models.pool import ReasoningPoolEntry
from src.models.rl import (
    ActionOutcome,
    RewardBreakdown,
    RLReport,
    RLStepLog,
    RolloutGroup,
    RolloutRecord,
    UtilityRecord,
    UtilitySummary,
)
from src.services.reward_service import RewardService
from src.storage.repositories.artifact import ArtifactRepository
from src.utils.formatters import Formatters
from src.utils.helpers import Helpers
from src.utils.validators import Validators

pipeline_logger = logging.getLogger("pipeline")

FRAMING_SLACK = 2
ABORTED_ROLLOUTS = "rollouts_aborted.jsonl"


@dataclass
class Rollout:
    """A sampled group before rewards are known."""

    pair_id: str
    side: Role
    x: list[int]
    outcomes: list[ActionOutcome]
    old_logprobs: list[list[float]]
    ref_logprobs: list[list[float]]
    embeddings: np.ndarray


def top_rationales(
    entries: Sequence[ReasoningPoolEntry],
) -> dict[str, tuple[list[int], list[int]]]:
    """Highest-weight rationale pair per pair id; direct-only pairs map to <empty>."""
    best: dict[str, ReasoningPoolEntry] = {}
    for entry in entries:
        current = best.get(entry.pair_id)
        if current is None or entry.weight > current.weight:
            best[entry.pair_id] = entry
    return {
        pair_id: (
            (EMPTY_RATIONALE, EMPTY_RATIONALE) if entry.direct_only
            else (entry.rationale_tokens(Role.query), entry.rationale_tokens(Role.target))
        )
        for pair_id, entry in best.items()
    }


def classify(tokens: Sequence[int], truncated: bool) -> ActionOutcome:
    """Direct iff the completion is exactly <empty>."""
    tokens = [int(t) for t in tokens]
    if tokens == EMPTY_RATIONALE:
        return ActionOutcome(action=Action.direct, rationale_tokens=tokens, length=0,
                             format_ok=True)
    return ActionOutcome(
        action=Action.reason,
        rationale_tokens=tokens,
        length=len(tokens),
        format_ok=not truncated and Validators.is_well_formed_rationale(tokens),
        truncated=truncated,
    )


def grpo_loss(
    policy: EncoderState,
    x: Sequence[int],
    completions: Sequence[Sequence[int]],
    old_logprobs: Sequence[Sequence[float]],
    ref_logprobs: Sequence[Sequence[float]],
    advantages: Sequence[float],
    config: RLConfig,
) -> Node:
    """Negative clipped surrogate with the per-token KL penalty, for one group.

    Per token: min(r A, clip(r, lo, hi) A) - beta * (exp(d) - d - 1) with
    r = exp(lp - lp_old) and d = lp_ref - lp; averaged per completion, then
    over the group.
    """
    per_completion = []
    for tokens, old, ref, advantage in zip(
        completions, old_logprobs, ref_logprobs, advantages, strict=True
    ):
        lp = token_logprobs(policy, x, tokens)
        ratio = ad.exp(ad.sub(lp, ad.constant(np.asarray(old, dtype=np.float64))))
        unclipped = ad.scale(ratio, advantage)
        clipped = ad.scale(ad.clip(ratio, config.clip_low, config.clip_high), advantage)
        surrogate = ad.minimum(unclipped, clipped)
        d = ad.sub(ad.constant(np.asarray(ref, dtype=np.float64)), lp)
        kl = ad.sub(ad.sub(ad.exp(d), d), 1.0)
        per_token = ad.sub(surrogate, ad.scale(kl, config.kl_beta))
        per_completion.append(ad.mean_all(per_token))
    return ad.scale(ad.mean_all(ad.stack(per_completion)), -1.0)


class RLService:
    """Stage-3 adaptive reasoning."""

    @staticmethod
    def estimate_utility(
        state: EncoderState,
        pairs: Sequence[PairRecord],
        entries: Sequence[ReasoningPoolEntry],
    ) -> list[UtilityRecord]:
        """Direct vs top-pool-rationale cosine for each pair.

        Pairs absent from the pool get no reasoning similarity and are left
        out of reward lookup.
        """
        rationales = top_rationales(entries)
        records = []
        with ad.no_grad():
            for pair in pairs:
                xq = Formatters.direct_input(pair.query.tokens)
                xt = Formatters.direct_input(pair.target.tokens)
                chosen = rationales.get(pair.pair_id)
                if chosen is None:
                    s_direct = cosine(embed_direct(state, xq), embed_direct(state, xt))
                    pipeline_logger.warning(f"{pair.pair_id} has no pool rationale; skipped")
                    records.append(UtilityRecord(pair_id=pair.pair_id,
                                                 difficulty=pair.difficulty, s_direct=s_direct))
                    continue
                eq, et = encode(state, xq, chosen[0]), encode(state, xt, chosen[1])
                s_direct = cosine(eq.z_direct, et.z_direct)
                s_reason = cosine(eq.z_reason, et.z_reason)
                records.append(
                    UtilityRecord(
                        pair_id=pair.pair_id,
                        difficulty=pair.difficulty,
                        s_direct=s_direct,
                        s_reason=s_reason,
                        delta=s_reason - s_direct,
                    )
                )
        return records

    @staticmethod
    def summarize_utility(records: Sequence[UtilityRecord]) -> UtilitySummary:
        defined = [r for r in records if r.delta is not None]
        by_difficulty: dict[Difficulty, list[float]] = defaultdict(list)
        for r in defined:
            by_difficulty[r.difficulty].append(r.delta)
        summary = UtilitySummary(
            count=len(records),
            undefined=len(records) - len(defined),
            fraction_positive=(
                sum(1 for r in defined if r.delta > 0) / len(defined) if defined else 0.0
            ),
            mean_delta=float(np.mean([r.delta for r in defined])) if defined else 0.0,
            mean_delta_by_difficulty={k: float(np.mean(v)) for k, v in by_difficulty.items()},
        )
        pipeline_logger.info(
            f"Utility: {summary.fraction_positive:.2%} positive over {len(defined)} pairs"
        )
        return summary

    @staticmethod
    def rollout(
        policy: EncoderState,
        reference: EncoderState,
        pair_id: str,
        side: Role,
        tokens: Sequence[int],
        config: RLConfig,
        seed: int,
    ) -> Rollout:
        """G completions of one instance with old and reference log-probs."""
        x = Formatters.direct_input(tokens)
        room = policy.config.max_seq_len - len(x) - 1 - FRAMING_SLACK
        if room < 1:
            raise UsageError(f"{pair_id} leaves no room to generate within max_seq_len")
        max_new = min(config.max_gen, room)
        outcomes, old, ref, embeddings = [], [], [], []
        with ad.no_grad():
            for g in range(config.group_size):
                sample = sample_rationale(
                    policy, x, config.temperature, max_new,
                    Helpers.derive_seed(seed, pair_id, side.value, g),
                )
                outcomes.append(classify(sample.tokens, sample.truncated))
                old.append(sample.logprobs)
                ref.append([float(v) for v in token_logprobs(reference, x, sample.tokens).value])
                embeddings.append(embed_with_reasoning(policy, x, sample.tokens).value)
        return Rollout(pair_id=pair_id, side=side, x=x, outcomes=outcomes, old_logprobs=old,
                       ref_logprobs=ref, embeddings=np.stack(embeddings))

    @staticmethod
    def grpo_step(
        policy: EncoderState,
        batch: Sequence[tuple[Sequence[int], RolloutGroup]],
        config: RLConfig,
    ) -> tuple[float, float]:
        """One optimizer step on the mean surrogate over groups.

        Reference log-probs are taken from each group, recorded against the
        frozen reference at rollout time. Returns (loss, gradient norm).
        """
        if not batch:
            raise UsageError("grpo_step needs at least one group")
        losses = [
            grpo_loss(policy, x, [o.rationale_tokens for o in group.outcomes],
                      group.old_logprobs, group.ref_logprobs, group.advantages, config)
            for x, group in batch
        ]
        loss = ad.mean_all(ad.stack(losses))
        if not np.isfinite(loss.item()):
            raise NonFiniteError("grpo surrogate")
        ad.backward(loss)
        norm = ad.grad_norm(policy.parameters())
        adam_step(policy, config.lr)
        return loss.item(), norm

    @staticmethod
    def batches(pairs: Sequence[PairRecord], batch_size: int, seed: int, epoch: int
                ) -> list[list[PairRecord]]:
        """Seeded shuffle; a trailing singleton joins the previous batch."""
        order = Helpers.rng(seed, "rl-order", epoch).permutation(len(pairs))
        shuffled = [pairs[int(i)] for i in order]
        chunks = [shuffled[i : i + batch_size] for i in range(0, len(shuffled), batch_size)]
        if len(chunks) > 1 and len(chunks[-1]) == 1:
            chunks[-2].extend(chunks.pop())
        return chunks

    @staticmethod
    def train_rl(
        state: EncoderState,
        pairs: Sequence[PairRecord],
        utilities: Sequence[UtilityRecord],
        config: RLConfig,
        seed: int,
        artifacts: ArtifactRepository | None = None,
        header: ProvenanceHeader | None = None,
    ) -> tuple[EncoderState, RLReport, list[RolloutRecord]]:
        """Optimize the policy in place against a frozen copy of the input state.

        A non-finite surrogate writes the rollouts gathered so far to
        ``rollouts_aborted.jsonl`` before raising.
        """
        report = RLReport(epochs=config.epochs, cost_coeff=config.cost_coeff,
                          length_cap=config.length_cap)
        records: list[RolloutRecord] = []
        deltas = {u.pair_id: u.delta for u in utilities if u.delta is not None}
        direct_sims = {u.pair_id: u.s_direct for u in utilities}
        usable = [p for p in pairs if p.pair_id in deltas]
        report.skipped_pairs = [p.pair_id for p in pairs if p.pair_id not in deltas]
        if report.skipped_pairs:
            pipeline_logger.warning(f"RL skips {len(report.skipped_pairs)} pairs without utility")
        if config.epochs == 0 or not usable:
            return state, report, records

        reference = state.clone()
        state.reset_moments()
        step = 0
        for epoch in range(config.epochs):
            for batch in RLService.batches(usable, config.batch_size, seed, epoch):
                step += 1
                rollouts = RLService._collect(state, reference, batch, config, seed, epoch)
                groups, step_records = RLService._reward(
                    batch, rollouts, deltas, direct_sims, step, config, seed, epoch
                )
                try:
                    loss, norm = RLService.grpo_step(
                        state, [(rollouts[key].x, group) for key, group in groups.items()], config
                    )
                except NonFiniteError:
                    if artifacts is not None and header is not None:
                        artifacts.save_records(ABORTED_ROLLOUTS, records + step_records, header)
                    raise
                records.extend(step_records)
                n_reason = sum(1 for r in step_records if r.action == Action.reason)
                log = RLStepLog(
                    step=step,
                    pairs=len(batch),
                    mean_reward=float(np.mean([r.reward.total for r in step_records])),
                    reasoning_ratio=n_reason / len(step_records),
                    surrogate=loss,
                    grad_norm=norm,
                )
                report.steps.append(log)
                pipeline_logger.info(
                    f"RL step {step}: reward {log.mean_reward:.4f}, "
                    f"reasoning {log.reasoning_ratio:.2f}"
                )
        return state, report, records

    @staticmethod
    def _collect(
        policy: EncoderState,
        reference: EncoderState,
        batch: Sequence[PairRecord],
        config: RLConfig,
        seed: int,
        epoch: int,
    ) -> dict[tuple[str, Role], Rollout]:
        jobs = [(pair, side) for pair in batch for side in (Role.query, Role.target)]
        rollout_seed = Helpers.derive_seed(seed, "rl-rollout", epoch)

        def run(job: tuple[PairRecord, Role]) -> Rollout:
            pair, side = job
            return RLService.rollout(policy, reference, pair.pair_id, side,
                                     pair.side(side).tokens, config, rollout_seed)

        if config.rollout_threads > 1:
            with ThreadPoolExecutor(max_workers=config.rollout_threads) as executor:
                results = list(executor.map(run, jobs))
        else:
            results = [run(job) for job in jobs]
        return {(r.pair_id, r.side): r for r in results}

    @staticmethod
    def _reward(
        batch: Sequence[PairRecord],
        rollouts: dict[tuple[str, Role], Rollout],
        deltas: dict[str, float],
        direct_sims: dict[str, float],
        step: int,
        config: RLConfig,
        seed: int,
        epoch: int,
    ) -> tuple[dict[tuple[str, Role], RolloutGroup], list[RolloutRecord]]:
        groups: dict[tuple[str, Role], RolloutGroup] = {}
        records: list[RolloutRecord] = []
        for i, pair in enumerate(batch):
            query = rollouts[(pair.pair_id, Role.query)]
            target = rollouts[(pair.pair_id, Role.target)]
            if len(batch) > 1:
                rng = Helpers.rng(seed, "rl-negative", epoch, pair.pair_id)
                others = [j for j in range(len(batch)) if j != i]
                negative = batch[others[int(rng.integers(len(others)))]]
                r_emb = RewardService.reward_emb(
                    query.embeddings,
                    target.embeddings,
                    rollouts[(negative.pair_id, Role.target)].embeddings,
                    rollouts[(negative.pair_id, Role.query)].embeddings,
                )
            else:
                r_emb = [0.0] * config.group_size

            if config.recompute_delta:
                sims = np.sum(query.embeddings * target.embeddings, axis=1)
                pair_deltas = [float(s) - direct_sims[pair.pair_id] for s in sims]
            else:
                pair_deltas = [deltas[pair.pair_id]] * config.group_size

            for rollout in (query, target):
                rewards = [
                    RewardBreakdown.of(
                        RewardService.reward_ada(outcome, pair_deltas[g], step, config),
                        RewardService.reward_format(outcome),
                        r_emb[g],
                    )
                    for g, outcome in enumerate(rollout.outcomes)
                ]
                advantages = RewardService.grpo_advantages([r.total for r in rewards])
                groups[(pair.pair_id, rollout.side)] = RolloutGroup(
                    pair_id=pair.pair_id,
                    side=rollout.side,
                    outcomes=rollout.outcomes,
                    rewards=rewards,
                    advantages=advantages,
                    old_logprobs=rollout.old_logprobs,
                    ref_logprobs=rollout.ref_logprobs,
                )
                records.extend(
                    RolloutRecord(
                        step=step,
                        pair_id=pair.pair_id,
                        side=rollout.side,
                        index=g,
                        action=outcome.action,
                        tokens=outcome.rationale_tokens,
                        length=outcome.length,
                        format_ok=outcome.format_ok,
                        delta=pair_deltas[g],
                        reward=rewards[g],
                        advantage=advantages[g],
                    )
                    for g, outcome in enumerate(rollout.outcomes)
                )
        return groups, records


"""Pool Service: candidate generation, counterfactual scoring and weighting."""

import asyncio
import itertools
import logging
import math
from collections import defaultdict
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor

from src.enums.corpus import Role
from src.enums.pool import SelectionMode
from src.errors.core import UsageError
from src.models.config import PoolConfig
from src.models.corpus import ConceptCodebook, PairRecord
from src.models.pool import PoolBuild, RationaleCandidate, ReasoningPoolEntry, ScoredRationale
from src.services.judge_service import RemoteJudge, SyntheticJudge
from src.services.third_party.backend_client import BackendClient
from src.services.worker_service import RemoteWorker, SyntheticWorker

pipeline_logger = logging.getLogger("pipeline")

SIDES = (Role.query, Role.target)


class PoolService:
    """Builds the weighted reasoning pool."""

    @staticmethod
    def select_and_weight(
        gains: Mapping[str, float], epsilon: float, gamma: float
    ) -> dict[str, float]:
        """Drop gains at or below ``epsilon``; softmax the rest with temperature ``gamma``.

        An empty result marks the side direct-only.
        """
        if gamma <= 0:
            raise UsageError("gamma must be positive")
        survivors = {key: value for key, value in gains.items() if value > epsilon}
        if not survivors:
            return {}
        peak = max(survivors.values())
        scaled = {key: math.exp((value - peak) / gamma) for key, value in survivors.items()}
        total = math.fsum(scaled.values())
        return {key: value / total for key, value in scaled.items()}

    @staticmethod
    def weigh_side(scored: Sequence[ScoredRationale], config: PoolConfig) -> list[ScoredRationale]:
        """Apply the configured selection mode to one side of one pair."""
        by_id = {s.candidate.candidate_id: s for s in scored}
        gains = {key: s.delta for key, s in by_id.items()}
        if config.selection == SelectionMode.confidence_only:
            kept = PoolService.select_and_weight(gains, config.epsilon, config.gamma)
            weights = PoolService.select_and_weight(
                {key: by_id[key].cr for key in kept}, -math.inf, config.gamma
            )
        elif config.selection == SelectionMode.uniform:
            weights = {key: 1.0 / len(by_id) for key in by_id}
        else:
            weights = PoolService.select_and_weight(gains, config.epsilon, config.gamma)
        return [s.model_copy(update={"weight": weights.get(key)}) for key, s in by_id.items()]

    @staticmethod
    def synthetic_workers(config: PoolConfig, codebook: ConceptCodebook) -> list[SyntheticWorker]:
        profiles = config.workers
        if config.selection == SelectionMode.single_worker:
            profiles = profiles[:1]
        return [SyntheticWorker(profile, codebook) for profile in profiles]

    @staticmethod
    def generate_all_candidates(
        pairs: Sequence[PairRecord],
        workers: Sequence[SyntheticWorker],
        seed: int,
        per_worker: int = 1,
    ) -> list[RationaleCandidate]:
        """Candidates in (pair, side, worker, index) order."""
        if not workers:
            raise UsageError("at least one worker is required")
        candidates = [
            worker.generate_candidates(pair.side(side), pair.pair_id, seed, index)
            for pair in pairs
            for side in SIDES
            for worker in workers
            for index in range(per_worker)
        ]
        pipeline_logger.info(
            f"Generated {len(candidates)} candidates from {len(workers)} workers"
        )
        return candidates

    @staticmethod
    def score_candidates(
        pairs: Sequence[PairRecord],
        candidates: Sequence[RationaleCandidate],
        judge: SyntheticJudge,
        threads: int = 1,
    ) -> list[ScoredRationale]:
        """Scored candidates in input order, however many threads score them."""
        by_pair = {pair.pair_id: pair for pair in pairs}
        missing = {c.pair_id for c in candidates} - by_pair.keys()
        if missing:
            raise UsageError(f"candidates reference unknown pairs: {sorted(missing)[:3]}")

        def score(candidate: RationaleCandidate) -> ScoredRationale:
            pair = by_pair[candidate.pair_id]
            return judge.score(pair.query, pair.target, candidate)

        if threads <= 1:
            return [score(c) for c in candidates]
        with ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(score, candidates))

    @staticmethod
    def assemble(
        pairs: Sequence[PairRecord], scored: Sequence[ScoredRationale], config: PoolConfig
    ) -> tuple[list[ScoredRationale], list[ReasoningPoolEntry]]:
        """Weigh every side and combine surviving sides into joint entries.

        The joint weight of a (query, target) combination is the product of the
        side weights, renormalized per pair. A pair with a side that has no
        survivor gets one direct-only entry.
        """
        grouped: dict[tuple[str, Role], list[ScoredRationale]] = defaultdict(list)
        for item in scored:
            grouped[(item.candidate.pair_id, item.candidate.side)].append(item)

        weighted: list[ScoredRationale] = []
        entries: list[ReasoningPoolEntry] = []
        n_direct_only = 0
        for pair in pairs:
            sides = {
                side: PoolService.weigh_side(grouped.get((pair.pair_id, side), []), config)
                for side in SIDES
            }
            weighted.extend(sides[Role.query])
            weighted.extend(sides[Role.target])
            survivors = {
                side: [s for s in sides[side] if s.weight is not None and s.weight > 0]
                for side in SIDES
            }
            combos = [
                (q, t, q.weight * t.weight)
                for q, t in itertools.product(survivors[Role.query], survivors[Role.target])
                if q.weight * t.weight > 0
            ]
            if not combos:
                entries.append(
                    ReasoningPoolEntry(pair_id=pair.pair_id, weight=1.0, direct_only=True)
                )
                n_direct_only += 1
                continue
            total = math.fsum(w for _, _, w in combos)
            entries.extend(
                ReasoningPoolEntry(
                    pair_id=pair.pair_id,
                    query_rationale=q,
                    target_rationale=t,
                    weight=min(1.0, w / total),
                )
                for q, t, w in combos
            )
        pipeline_logger.info(
            f"Pool has {len(entries)} entries over {len(pairs)} pairs, "
            f"{n_direct_only} direct-only"
        )
        return weighted, entries

    @staticmethod
    def build_pool(
        pairs: Sequence[PairRecord], codebook: ConceptCodebook, config: PoolConfig, seed: int
    ) -> PoolBuild:
        """Synthetic workers and judge end to end."""
        workers = PoolService.synthetic_workers(config, codebook)
        candidates = PoolService.generate_all_candidates(
            pairs, workers, seed, config.candidates_per_worker
        )
        judge = SyntheticJudge(codebook, config.distractor_penalty)
        scored = PoolService.score_candidates(pairs, candidates, judge, config.score_threads)
        weighted, entries = PoolService.assemble(pairs, scored, config)
        return PoolBuild(candidates=candidates, scored=weighted, entries=entries)

    @staticmethod
    async def generate_remote_candidates(
        pairs: Sequence[PairRecord], client: BackendClient, config: PoolConfig, seed: int
    ) -> list[RationaleCandidate]:
        """One remote worker per configured profile, addressed by kind as model name.

        Malformed generations are dropped; order matches the synthetic path.
        """
        profiles = config.workers[:1] if config.selection == SelectionMode.single_worker \
            else config.workers
        workers = [RemoteWorker(client, profile.kind.value) for profile in profiles]
        jobs = [
            worker.generate_candidates(pair.side(side), pair.pair_id, seed, index)
            for pair in pairs
            for side in SIDES
            for worker in workers
            for index in range(config.candidates_per_worker)
        ]
        results = await asyncio.gather(*jobs)
        candidates = [c for c in results if c is not None]
        pipeline_logger.info(
            f"Remote backend produced {len(candidates)} candidates, "
            f"discarded {len(results) - len(candidates)}"
        )
        return candidates

    @staticmethod
    async def score_remote_candidates(
        pairs: Sequence[PairRecord], candidates: Sequence[RationaleCandidate],
        client: BackendClient,
    ) -> list[ScoredRationale]:
        by_pair = {pair.pair_id: pair for pair in pairs}
        judge = RemoteJudge(client)
        return list(await asyncio.gather(*[
            judge.score(by_pair[c.pair_id].query, by_pair[c.pair_id].target, c)
            for c in candidates
        ]))

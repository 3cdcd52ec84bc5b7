"""Unit tests for the reasoning pool."""

import math

import pytest

from src.enums.corpus import Role
from src.enums.pool import LengthRegime, SelectionMode, WorkerKind
from src.errors.core import UsageError
from src.models.config import PoolConfig, WorkerProfile
from src.models.pool import RationaleCandidate, ScoredRationale
from src.services.judge_service import SyntheticJudge
from src.services.pool_service import PoolService
from src.services.worker_service import SyntheticWorker, frame_candidate


def scored(key: str, c0: float, cr: float) -> ScoredRationale:
    candidate = RationaleCandidate(
        candidate_id=key, pair_id="pair-0000", source="test", side=Role.query,
        tokens=frame_candidate([20], 21),
    )
    return ScoredRationale(candidate=candidate, c0=c0, cr=cr, delta=cr - c0)


def worker(kind: WorkerKind, recall: float) -> WorkerProfile:
    return WorkerProfile(
        kind=kind, concept_recall=recall, noise_rate=0.0, length_regime=LengthRegime.short
    )


class TestSelectAndWeight:
    """Threshold then softmax."""

    def test_equal_gains(self):
        """Equal gains split evenly."""
        assert PoolService.select_and_weight({"a": 0.0, "b": 0.0}, -0.1, 1.0) == {
            "a": 0.5, "b": 0.5
        }

    def test_softmax(self):
        """Gains 1 and 0 at gamma 1 weigh e/(e+1) and 1/(e+1)."""
        weights = PoolService.select_and_weight({"a": 1.0, "b": 0.0}, -0.1, 1.0)
        assert weights["a"] == pytest.approx(math.e / (math.e + 1))
        assert weights["b"] == pytest.approx(1 / (math.e + 1))

    def test_all_dropped(self):
        """No survivor means direct-only."""
        assert PoolService.select_and_weight({"a": -1.0}, -0.1, 1.0) == {}

    def test_threshold_is_strict(self):
        """A gain equal to epsilon is dropped."""
        assert PoolService.select_and_weight({"a": -0.1, "b": 0.2}, -0.1, 1.0) == {"b": 1.0}

    @pytest.mark.parametrize("scale, shift", [(0.5, 0.0), (3.0, 0.0), (2.0, -1.5), (1.0, 4.0)])
    def test_rescaling_gains_with_epsilon_and_gamma(self, scale, shift):
        """Mapping gains and epsilon by one affine map and scaling gamma keeps the weights."""
        gains = {"a": 0.7, "b": 0.2, "c": -0.05, "d": -0.4}
        base = PoolService.select_and_weight(gains, -0.1, 0.5)
        moved = PoolService.select_and_weight(
            {key: scale * value + shift for key, value in gains.items()},
            scale * -0.1 + shift,
            scale * 0.5,
        )
        assert moved.keys() == base.keys() == {"a", "b", "c"}
        assert moved == pytest.approx(base, abs=1e-12)

    def test_gamma_must_be_positive(self):
        """gamma 0 is rejected."""
        with pytest.raises(UsageError):
            PoolService.select_and_weight({"a": 1.0}, -0.1, 0.0)


class TestWeighSide:
    """Selection modes."""

    @pytest.fixture
    def side(self) -> list[ScoredRationale]:
        return [scored("a", -1.0, 1.0), scored("b", -1.0, 0.0), scored("c", -1.0, -1.5)]

    def test_counterfactual(self, side):
        """Gain-softmax over survivors; dropped candidates keep no weight."""
        out = {s.candidate.candidate_id: s.weight for s in PoolService.weigh_side(side, PoolConfig())}
        assert out["a"] == pytest.approx(math.e / (math.e + 1))
        assert out["c"] is None

    def test_uniform(self, side):
        """Every candidate shares weight evenly, negative gains included."""
        config = PoolConfig(selection=SelectionMode.uniform)
        out = {s.candidate.candidate_id: s.weight for s in PoolService.weigh_side(side, config)}
        assert out == pytest.approx({"a": 1 / 3, "b": 1 / 3, "c": 1 / 3})

    def test_uniform_keeps_harmful_side(self):
        """A side whose only candidate hurts alignment still trains on it."""
        config = PoolConfig(selection=SelectionMode.uniform)
        out = PoolService.weigh_side([scored("a", 1.0, -2.0)], config)
        assert out[0].delta < config.epsilon
        assert out[0].weight == 1.0

    def test_confidence_only(self, side):
        """Survivors are weighted by post-rationale confidence."""
        config = PoolConfig(selection=SelectionMode.confidence_only, gamma=2.0)
        out = {s.candidate.candidate_id: s.weight for s in PoolService.weigh_side(side, config)}
        assert out["a"] == pytest.approx(math.exp(0.5) / (math.exp(0.5) + 1))
        assert out["c"] is None

    def test_single_worker_keeps_first_profile(self, codebook, short_workers):
        """single_worker ablation uses only the first worker."""
        config = PoolConfig(workers=short_workers, selection=SelectionMode.single_worker)
        workers = PoolService.synthetic_workers(config, codebook)
        assert [w.source for w in workers] == ["instruct"]


class TestBuildPool:
    """End to end synthetic pool."""

    def test_perfect_worker_gets_full_weight(self, small_corpus):
        """One perfect worker yields one weight-1 entry per pair."""
        config = PoolConfig(workers=[worker(WorkerKind.proprietary, 1.0)])
        build = PoolService.build_pool(small_corpus.pairs, small_corpus.codebook, config, seed=0)
        assert len(build.entries) == len(small_corpus.pairs)
        assert all(e.weight == 1.0 and not e.direct_only for e in build.entries)

    def test_joint_weights_sum_to_one(self, small_corpus, pool_config):
        """Per pair, the weights of non-direct entries sum to one."""
        build = PoolService.build_pool(small_corpus.pairs, small_corpus.codebook, pool_config, 0)
        for pair in small_corpus.pairs:
            weights = [e.weight for e in build.entries if e.pair_id == pair.pair_id]
            assert weights
            assert math.fsum(weights) == pytest.approx(1.0)

    def test_counts(self, small_corpus, pool_config):
        """Two workers, two sides per pair."""
        build = PoolService.build_pool(small_corpus.pairs, small_corpus.codebook, pool_config, 0)
        assert len(build.candidates) == 4 * len(small_corpus.pairs)
        assert len(build.scored) == len(build.candidates)

    def test_recall_raises_gain(self, small_corpus):
        """Bridging every concept never gains less than bridging none, and sometimes more."""
        judge = SyntheticJudge(small_corpus.codebook)
        perfect = SyntheticWorker(worker(WorkerKind.proprietary, 1.0), small_corpus.codebook)
        blind = SyntheticWorker(worker(WorkerKind.instruct, 0.0), small_corpus.codebook)
        pairs = small_corpus.pairs
        good = PoolService.score_candidates(
            pairs, PoolService.generate_all_candidates(pairs, [perfect], 0), judge
        )
        bad = PoolService.score_candidates(
            pairs, PoolService.generate_all_candidates(pairs, [blind], 0), judge
        )
        assert all(g.delta >= b.delta for g, b in zip(good, bad, strict=True))
        assert sum(g.delta for g in good) > sum(b.delta for b in bad)

    def test_huge_epsilon_is_direct_only(self, small_corpus, pool_config):
        """Nothing survives epsilon 100."""
        config = pool_config.model_copy(update={"epsilon": 100.0})
        build = PoolService.build_pool(small_corpus.pairs, small_corpus.codebook, config, 0)
        assert all(e.direct_only and e.weight == 1.0 for e in build.entries)
        assert len(build.entries) == len(small_corpus.pairs)

    def test_thread_count_keeps_order(self, small_corpus, pool_config, judge):
        """Scoring with four threads matches serial scoring."""
        workers = PoolService.synthetic_workers(pool_config, small_corpus.codebook)
        candidates = PoolService.generate_all_candidates(small_corpus.pairs, workers, 0)
        serial = PoolService.score_candidates(small_corpus.pairs, candidates, judge, threads=1)
        threaded = PoolService.score_candidates(small_corpus.pairs, candidates, judge, threads=4)
        assert serial == threaded

    def test_unknown_pair(self, small_corpus, pool_config, judge):
        """Candidates for pairs not given are rejected."""
        workers = PoolService.synthetic_workers(pool_config, small_corpus.codebook)
        candidates = PoolService.generate_all_candidates(small_corpus.pairs[:2], workers, 0)
        with pytest.raises(UsageError, match="unknown pairs"):
            PoolService.score_candidates(small_corpus.pairs[2:], candidates, judge)

    def test_no_workers(self, small_corpus):
        """Generation needs a worker."""
        with pytest.raises(UsageError):
            PoolService.generate_all_candidates(small_corpus.pairs, [], 0)

    def test_deterministic(self, small_corpus, pool_config):
        """Same seed, same pool."""
        a = PoolService.build_pool(small_corpus.pairs, small_corpus.codebook, pool_config, 3)
        b = PoolService.build_pool(small_corpus.pairs, small_corpus.codebook, pool_config, 3)
        assert a == b

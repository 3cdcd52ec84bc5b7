"""Unit tests for joint training and the gradient audit."""

import json

import numpy as np
import pytest

from src.engine import autodiff as ad
from src.engine.encoder import init_encoder, next_token_logits
from src.engine.objectives import EMPTY_RATIONALE
from src.engine.optim import adam_step
from src.enums.corpus import Role
from src.enums.tokens import SpecialToken
from src.errors.core import UsageError
from src.errors.numerical import NonFiniteError
from src.models.config import EncoderConfig, LossWeights, TrainConfig
from src.models.pool import RationaleCandidate, ReasoningPoolEntry, ScoredRationale
from src.services import joint_trainer_service
from src.services.joint_trainer_service import JointTrainerService
from src.services.pool_service import PoolService
from src.services.worker_service import frame_candidate
from src.storage.repositories.checkpoint import CheckpointRepository
from src.utils.formatters import Formatters


@pytest.fixture
def train_config() -> TrainConfig:
    """One quick epoch."""
    return TrainConfig(batch_size=4, epochs=1, learning_rate=0.01)


@pytest.fixture
def entries(small_corpus, pool_config) -> list[ReasoningPoolEntry]:
    """Pool over the small corpus."""
    return PoolService.build_pool(small_corpus.pairs, small_corpus.codebook, pool_config, 0).entries


class TestBatching:
    """Epoch layout."""

    @pytest.mark.parametrize("n, size, steps", [(10, 4, 3), (9, 4, 2), (8, 4, 2), (1, 4, 0)])
    def test_steps_per_epoch(self, n, size, steps):
        """A trailing singleton does not make a step."""
        assert JointTrainerService.steps_per_epoch(n, size) == steps

    def test_batches_drop_singleton(self, small_corpus, entries, train_config):
        """Nine examples at batch size four give two batches."""
        examples = JointTrainerService.draw_examples(small_corpus.pairs[:9], entries,
                                                     train_config, 0, 0)
        chunks = JointTrainerService.batches(examples, 4, seed=0, epoch=0)
        assert [len(c) for c in chunks] == [4, 4]

    def test_draw_examples(self, small_corpus, entries):
        """Pooled pairs draw a pool combination; direct-only pairs train on <empty>."""
        config = TrainConfig(empty_injection_prob=0.0)
        examples = JointTrainerService.draw_examples(small_corpus.pairs, entries, config, 0, 0)
        direct_only = {e.pair_id for e in entries if e.direct_only}
        for example in examples:
            if example.pair_id in direct_only:
                assert example.query_rationale == EMPTY_RATIONALE
                assert example.target_rationale == EMPTY_RATIONALE
            else:
                options = {
                    tuple(e.rationale_tokens(Role.query))
                    for e in entries if e.pair_id == example.pair_id
                }
                assert tuple(example.query_rationale) in options

    def test_draws_follow_pool_weights(self, small_corpus):
        """Combination frequencies over many epochs pass a chi-square test."""
        pair = small_corpus.pairs[0]
        weights = [0.5, 0.3, 0.2]

        def side(body: int, role: Role) -> ScoredRationale:
            candidate = RationaleCandidate(
                candidate_id=f"{pair.pair_id}:{role.value}:{body}", pair_id=pair.pair_id,
                source="test", side=role, tokens=frame_candidate([body], body),
            )
            return ScoredRationale(candidate=candidate, c0=0.0, cr=1.0, delta=1.0)

        options = [
            ReasoningPoolEntry(pair_id=pair.pair_id, query_rationale=side(20 + i, Role.query),
                               target_rationale=side(20 + i, Role.target), weight=w)
            for i, w in enumerate(weights)
        ]
        config = TrainConfig(empty_injection_prob=0.0)
        epochs = 2000
        counts = np.zeros(len(weights))
        for epoch in range(epochs):
            (example,) = JointTrainerService.draw_examples([pair], options, config, 0, epoch)
            counts[example.query_rationale[1] - 20] += 1
        expected = epochs * np.array(weights)
        # 13.8 is the 0.999 quantile of chi-square with two degrees of freedom
        assert float(((counts - expected) ** 2 / expected).sum()) < 13.8

    def test_empty_injection(self, small_corpus, entries):
        """Probability one swaps every eligible side to <empty>."""
        config = TrainConfig(empty_injection_prob=1.0)
        examples = JointTrainerService.draw_examples(small_corpus.pairs, entries, config, 0, 0)
        for pair, example in zip(small_corpus.pairs, examples, strict=True):
            if pair.query.empty_eligible:
                assert example.query_rationale == EMPTY_RATIONALE

    def test_pairs_missing_from_pool(self, small_corpus, train_config):
        """Pairs the pool never saw train without reasoning."""
        examples = JointTrainerService.draw_examples(small_corpus.pairs[:2], [], train_config, 0, 0)
        assert all(e.query_rationale == EMPTY_RATIONALE for e in examples)


class TestTrainJoint:
    """The joint training loop."""

    def test_one_epoch(self, tiny_state, small_corpus, entries, train_config, tmp_path,
                       header_factory):
        """Twelve pairs at batch size four: three steps, epoch and final checkpoints."""
        checkpoints = CheckpointRepository(tmp_path)
        state, report = JointTrainerService.train_joint(
            tiny_state, small_corpus.pairs, entries, train_config, seed=0,
            checkpoints=checkpoints, header=header_factory(kind="checkpoint"),
        )
        assert report.steps_per_epoch == 3
        assert [s.step for s in report.steps] == [0, 1, 2]
        assert state.step == 3
        assert all(np.isfinite(s.total) for s in report.steps)
        assert (tmp_path / "epoch-1" / "manifest.json").exists()
        assert report.final_checkpoint == str(tmp_path / "final")
        assert report.parameter_count == 3072

    def test_deterministic(self, tiny_state, small_corpus, entries, train_config):
        """Same seed, same weights."""
        a, ra = JointTrainerService.train_joint(tiny_state.clone(), small_corpus.pairs, entries,
                                                train_config, seed=1)
        b, rb = JointTrainerService.train_joint(tiny_state.clone(), small_corpus.pairs, entries,
                                                train_config, seed=1)
        assert [s.total for s in ra.steps] == [s.total for s in rb.steps]
        for name, param in a.params.items():
            assert param.value.tobytes() == b.params[name].value.tobytes()

    def test_zero_epochs(self, tiny_state, small_corpus, entries):
        """Nothing to do leaves the state alone."""
        before = tiny_state.params["tok_emb"].value.copy()
        state, report = JointTrainerService.train_joint(
            tiny_state, small_corpus.pairs, entries, TrainConfig(epochs=0), seed=0
        )
        assert report.steps == []
        assert np.array_equal(state.params["tok_emb"].value, before)

    def test_frozen_batch_loss_decreases(self, tiny_state):
        """Fifty Adam steps on one batch lower the joint loss."""
        state = tiny_state.clone()
        batch = JointTrainerService.tiny_batch(state, seed=2, size=4)
        totals = []
        for _ in range(50):
            state.zero_grad()
            loss, parts = joint_trainer_service.batch_loss(state, batch, LossWeights())
            ad.backward(loss)
            adam_step(state, lr=0.01)
            totals.append(parts["total"])
        assert np.mean(totals[-5:]) < np.mean(totals[:5])
        assert totals[-1] < totals[0]

    @pytest.mark.slow
    def test_trained_policy_opens_with_reason(self, tiny_state, small_corpus, pool_config):
        """Trained on rationales that all open with <reason>, greedy decoding starts there."""
        keep_all = pool_config.model_copy(update={"epsilon": -1e9})
        entries = PoolService.build_pool(
            small_corpus.pairs, small_corpus.codebook, keep_all, 0
        ).entries
        assert not any(e.direct_only for e in entries)
        config = TrainConfig(batch_size=4, epochs=20, learning_rate=0.01,
                             empty_injection_prob=0.0)
        state, _ = JointTrainerService.train_joint(
            tiny_state, small_corpus.pairs, entries, config, seed=0
        )
        instances = [p.side(side) for p in small_corpus.pairs for side in (Role.query, Role.target)]
        opens = [
            int(np.argmax(next_token_logits(state, Formatters.direct_input(x.tokens))))
            == SpecialToken.reason
            for x in instances
        ]
        assert np.mean(opens) >= 0.9

    def test_empty_pool(self, tiny_state, small_corpus, train_config):
        """Training needs a pool."""
        with pytest.raises(UsageError, match="pool is empty"):
            JointTrainerService.train_joint(tiny_state, small_corpus.pairs, [], train_config, 0)

    def test_too_few_pairs(self, tiny_state, small_corpus, entries, train_config):
        """In-batch negatives need two pairs."""
        with pytest.raises(UsageError, match="two pairs"):
            JointTrainerService.train_joint(tiny_state, small_corpus.pairs[:1], entries,
                                            train_config, 0)

    def test_non_finite_persists_batch(self, tiny_state, small_corpus, entries, train_config,
                                       tmp_path, monkeypatch):
        """A non-finite loss writes the offending batch and raises."""

        def broken(state, batch, weights):
            parts = {"reason": 0.0, "cot": 0.0, "direct": 0.0, "total": float("nan")}
            return ad.constant(0.0), parts

        monkeypatch.setattr(joint_trainer_service, "batch_loss", broken)
        with pytest.raises(NonFiniteError):
            JointTrainerService.train_joint(tiny_state, small_corpus.pairs, entries,
                                            train_config, 0, checkpoints=CheckpointRepository(tmp_path))
        payload = json.loads((tmp_path / "nonfinite_batch.json").read_text(encoding="utf-8"))
        assert payload["step"] == 0
        assert len(payload["batch"]) == 4


class TestGradcheck:
    """Finite-difference audit of the joint loss."""

    def test_subsampled_check_passes(self, tiny_state):
        """Every tensor agrees with central differences."""
        batch = JointTrainerService.tiny_batch(tiny_state, seed=0)
        report = JointTrainerService.gradcheck(tiny_state, batch, entries_per_tensor=3)
        assert report.passed
        assert report.max_rel_error <= 1e-5
        assert {t.name for t in report.tensors} == set(tiny_state.params)
        assert all(t.entries_checked == 3 for t in report.tensors)

    def test_corrupted_rule_is_caught(self, tiny_state, monkeypatch):
        """Doubling the tanh derivative shows up as a large error."""
        true_rule = ad.BACKWARD_RULES["tanh"]

        def doubled(node, g):
            return tuple(2.0 * grad for grad in true_rule(node, g))

        monkeypatch.setitem(ad.BACKWARD_RULES, "tanh", doubled)
        batch = JointTrainerService.tiny_batch(tiny_state, seed=0)
        report = JointTrainerService.gradcheck(tiny_state, batch, entries_per_tensor=3)
        assert not report.passed
        assert report.max_rel_error > 1e-2

    def test_parameter_limit(self):
        """The default encoder is too large for a full audit."""
        state = init_encoder(EncoderConfig(), seed=0)
        with pytest.raises(UsageError, match="at most 5000"):
            JointTrainerService.gradcheck(state, [])

    @pytest.mark.slow
    def test_full_check(self, tiny_state):
        """Every entry of every tensor at low cot weight and high temperature."""
        batch = JointTrainerService.tiny_batch(tiny_state, seed=1, size=3)
        weights = LossWeights(tau=0.5)
        report = JointTrainerService.gradcheck(tiny_state, batch, weights=weights)
        assert report.passed

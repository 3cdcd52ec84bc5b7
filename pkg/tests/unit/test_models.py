"""Unit tests for models."""

import json

import pytest
from pydantic import ValidationError

from src.enums.corpus import Difficulty, Modality, Role, Split
from src.enums.tokens import SpecialToken
from src.models.config import CorpusConfig, EncoderConfig, PipelineConfig, RLConfig
from src.models.corpus import Instance, PairRecord
from src.models.pool import RationaleCandidate, ReasoningPoolEntry, ScoredRationale

R, E, S = SpecialToken.reason.value, SpecialToken.reason_end.value, SpecialToken.sum.value


def instance(role: Role, tokens: list[int], concepts: list[int]) -> Instance:
    return Instance(
        id=f"pair-0000:{role.value}", role=role, tokens=tokens, modality_tag=Modality.text,
        latent_concepts=concepts, difficulty=Difficulty.easy, content_length=len(tokens),
        empty_eligible=True,
    )


def scored(side: Role) -> ScoredRationale:
    candidate = RationaleCandidate(candidate_id=f"pair-0000:{side.value}:instruct:0",
                                   pair_id="pair-0000", source="instruct", side=side,
                                   tokens=[R, 20, E, S, 30])
    return ScoredRationale(candidate=candidate, c0=0.25, cr=0.75, delta=0.5)


class TestConfigModels:
    """Test config validation."""

    def test_defaults(self):
        """An empty document is a valid config."""
        config = PipelineConfig()
        assert config.train.loss.tau == 0.05
        assert config.rl.group_size == 8
        assert [w.kind.value for w in config.pool.workers] == ["instruct", "thinking",
                                                              "proprietary"]

    def test_unknown_key(self):
        """Unknown keys are rejected at every level."""
        with pytest.raises(ValidationError):
            PipelineConfig.model_validate({"train": {"epoch": 3}})

    def test_too_many_pairs(self):
        """Four concepts in pairs give six distinct sets."""
        CorpusConfig(n_pairs=6, n_concepts=4)
        with pytest.raises(ValidationError, match="distinct concept sets"):
            CorpusConfig(n_pairs=7, n_concepts=4)

    def test_split_percentages(self):
        """Train and rl shares leave room for eval."""
        with pytest.raises(ValidationError):
            CorpusConfig(train_percent=80, rl_percent=30)

    def test_heads_divide_dim(self):
        """Heads split the model width evenly."""
        with pytest.raises(ValidationError, match="divisible"):
            EncoderConfig(model_dim=10, head_count=3)

    def test_clip_range(self):
        """The clip interval brackets one."""
        with pytest.raises(ValidationError):
            RLConfig(clip_low=1.1)


class TestCorpusModels:
    """Test corpus records."""

    def test_reserved_tokens(self):
        """Special ids never appear as content."""
        with pytest.raises(ValidationError, match="reserved"):
            instance(Role.query, [20, SpecialToken.yes.value], [0])

    def test_pair_shares_concept(self):
        """A positive pair shares a latent concept."""
        pair = PairRecord(pair_id="pair-0000", query=instance(Role.query, [20], [0, 1]),
                          target=instance(Role.target, [21], [1, 2]), split=Split.train)
        assert pair.difficulty == Difficulty.easy
        assert pair.side(Role.target).tokens == [21]
        with pytest.raises(ValidationError, match="share no latent concept"):
            PairRecord(pair_id="pair-0000", query=instance(Role.query, [20], [0]),
                       target=instance(Role.target, [21], [1]), split=Split.train)


class TestPoolModels:
    """Test pool records."""

    def test_candidate_framing(self):
        """Candidates must be framed; the encoder part drops the summary."""
        assert scored(Role.query).candidate.encoder_tokens == [R, 20, E]
        with pytest.raises(ValidationError, match="not framed"):
            RationaleCandidate(candidate_id="c", pair_id="pair-0000", source="instruct",
                               side=Role.query, tokens=[R, 20, E])

    def test_delta_is_exact(self):
        """delta is cr - c0."""
        candidate = scored(Role.query).candidate
        with pytest.raises(ValidationError):
            ScoredRationale(candidate=candidate, c0=0.25, cr=0.75, delta=0.4)

    def test_entry_sides(self):
        """Entries carry both rationales or none."""
        entry = ReasoningPoolEntry(pair_id="pair-0000", query_rationale=scored(Role.query),
                                   target_rationale=scored(Role.target), weight=1.0)
        assert entry.rationale_tokens(Role.target) == [R, 20, E]
        direct = ReasoningPoolEntry(pair_id="pair-0000", weight=1.0, direct_only=True)
        assert direct.rationale_tokens(Role.query) is None
        with pytest.raises(ValidationError):
            ReasoningPoolEntry(pair_id="pair-0000", query_rationale=scored(Role.query),
                               weight=1.0)

    def test_weight_bounds(self):
        """Weights lie in (0, 1]."""
        with pytest.raises(ValidationError):
            ReasoningPoolEntry(pair_id="pair-0000", weight=0.0, direct_only=True)


class TestJsonLines:
    """Test CoreModel.to_json_line."""

    def test_field_order(self, header_factory):
        """Keys follow declaration order on one line."""
        line = header_factory().to_json_line()
        assert "\n" not in line
        assert list(json.loads(line)) == ["schema_version", "kind", "stage", "seed",
                                          "config_hash", "config"]


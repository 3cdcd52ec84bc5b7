"""Unit tests for the synthetic corpus."""

import pytest
from pydantic import ValidationError

from src.enums.corpus import Difficulty, Modality, Split
from src.enums.tokens import SPECIAL_TOKEN_COUNT
from src.errors.core import UsageError
from src.models.config import CorpusConfig
from src.models.corpus import ConceptCodebook
from src.services.corpus_service import CorpusService


def concept_tokens(codebook: ConceptCodebook) -> set[int]:
    ids: set[int] = set()
    for entry in codebook.concepts:
        ids |= {entry.surface, entry.bridge, *entry.query_aliases, *entry.target_aliases}
    return ids


class TestCodebook:
    """Token layout."""

    def test_ids_are_disjoint(self, codebook):
        """Every role in the world has its own token ids."""
        ids = [*codebook.modality_tags.values(), *codebook.fillers, *codebook.distractors,
               *codebook.neutral]
        for entry in codebook.concepts:
            ids += [entry.surface, entry.bridge, *entry.query_aliases, *entry.target_aliases]
        assert len(ids) == len(set(ids))
        assert min(ids) == SPECIAL_TOKEN_COUNT
        assert max(ids) == codebook.vocab_used - 1

    def test_vocab_used(self, codebook):
        """9 specials, 3 tags, 6 concepts of 4 ids and 12 pool ids."""
        assert codebook.vocab_used == 9 + 3 + 24 + 12

    def test_seeded(self, small_corpus_config):
        """The concept block is shuffled by seed."""
        a = CorpusService.build_codebook(small_corpus_config, 1)
        b = CorpusService.build_codebook(small_corpus_config, 1)
        c = CorpusService.build_codebook(small_corpus_config, 2)
        assert a == b
        assert a.concepts != c.concepts


class TestSplit:
    """Hash-based split assignment."""

    @pytest.mark.parametrize(
        "pair_id, split",
        [("pair-0000", Split.train), ("pair-0003", Split.rl), ("pair-0010", Split.eval)],
    )
    def test_default_split(self, pair_id, split):
        """70/10/20 buckets from the pair id alone."""
        assert CorpusService.assign_split(pair_id, CorpusConfig()) == split

    def test_everything_train(self):
        """train_percent 100 sends every pair to train."""
        config = CorpusConfig(train_percent=100, rl_percent=0)
        assert CorpusService.assign_split("pair-0010", config) == Split.train


class TestGenerateCorpus:
    """Seeded pair generation."""

    def test_pair_count_and_ids(self, small_corpus):
        """Ids are zero-padded indices."""
        assert [p.pair_id for p in small_corpus.pairs] == [f"pair-{i:04d}" for i in range(12)]

    def test_deterministic(self, small_corpus_config, small_corpus):
        """Same seed, same corpus."""
        again = CorpusService.generate_corpus(small_corpus_config, seed=3, vocab_size=64)
        assert again.model_dump() == small_corpus.model_dump()

    def test_seed_changes_corpus(self, small_corpus_config, small_corpus):
        """Another seed draws another corpus."""
        other = CorpusService.generate_corpus(small_corpus_config, seed=4, vocab_size=64)
        assert other.model_dump() != small_corpus.model_dump()

    @pytest.mark.parametrize("fraction, difficulty", [(0.0, Difficulty.easy), (1.0, Difficulty.hard)])
    def test_hard_fraction_extremes(self, small_corpus_config, fraction, difficulty):
        """hard_fraction 0 and 1 give uniform difficulty."""
        config = small_corpus_config.model_copy(update={"hard_fraction": fraction})
        corpus = CorpusService.generate_corpus(config, seed=3, vocab_size=64)
        assert {p.difficulty for p in corpus.pairs} == {difficulty}

    def test_hard_fraction_count(self, small_corpus):
        """Half of twelve pairs are hard by default."""
        assert sum(p.difficulty == Difficulty.hard for p in small_corpus.pairs) == 6

    def test_easy_pairs_share_surface(self, small_corpus):
        """Easy positives both carry the surface tokens of their concepts."""
        codebook = small_corpus.codebook
        for pair in small_corpus.pairs:
            if pair.difficulty == Difficulty.easy:
                surfaces = {codebook.entry(c).surface for c in pair.query.latent_concepts}
                assert surfaces <= set(pair.query.tokens)
                assert surfaces <= set(pair.target.tokens)

    def test_hard_pairs_share_no_concept_token(self, small_corpus):
        """Hard positives are linked only through latent concepts."""
        concepts = concept_tokens(small_corpus.codebook)
        for pair in small_corpus.pairs:
            if pair.difficulty == Difficulty.hard:
                shared = set(pair.query.tokens) & set(pair.target.tokens) & concepts
                assert not shared
                assert pair.query.latent_concepts == pair.target.latent_concepts

    def test_concept_sets_distinct(self, small_corpus):
        """No two pairs draw the same concept set."""
        sets = [tuple(p.query.latent_concepts) for p in small_corpus.pairs]
        assert len(sets) == len(set(sets))

    def test_modality_templates(self, small_corpus):
        """Tags wrap content according to modality."""
        tags = small_corpus.codebook.modality_tags
        for pair in small_corpus.pairs:
            inst = pair.query
            tag = tags[inst.modality_tag]
            if inst.modality_tag == Modality.text:
                assert inst.tokens[0] == tag and inst.tokens[-1] != tag
            elif inst.modality_tag == Modality.image:
                assert inst.tokens[-1] == tag and inst.tokens[0] != tag
            else:
                assert inst.tokens[0] == tag == inst.tokens[-1]

    def test_empty_eligible(self, small_corpus):
        """Only short easy instances may skip reasoning."""
        for pair in small_corpus.pairs:
            for inst in (pair.query, pair.target):
                expected = inst.difficulty == Difficulty.easy and inst.content_length < 5
                assert inst.empty_eligible == expected

    def test_vocab_overflow(self, small_corpus_config):
        """The world must fit the encoder vocabulary."""
        with pytest.raises(UsageError, match="vocab_size is 40"):
            CorpusService.generate_corpus(small_corpus_config, seed=3, vocab_size=40)

    def test_by_split_partitions(self, small_corpus):
        """Splits cover every pair exactly once."""
        total = sum(len(small_corpus.by_split(s)) for s in Split)
        assert total == len(small_corpus.pairs)


class TestCorpusConfig:
    """Config validation."""

    def test_concepts_per_pair_too_large(self):
        """A pair cannot need more concepts than exist."""
        with pytest.raises(ValidationError):
            CorpusConfig(n_concepts=4, concepts_per_pair=5)

    def test_not_enough_concept_sets(self):
        """C(4, 2) = 6 sets cannot serve 7 pairs."""
        with pytest.raises(ValidationError):
            CorpusConfig(n_pairs=7, n_concepts=4, concepts_per_pair=2)

    def test_split_over_hundred(self):
        """train and rl percentages share one hundred."""
        with pytest.raises(ValidationError):
            CorpusConfig(train_percent=95, rl_percent=10)

    def test_unknown_key(self):
        """Unknown keys are rejected."""
        with pytest.raises(ValidationError):
            CorpusConfig(n_pair=3)

"""Corpus Service: the deterministic bridging-concept retrieval world."""

import itertools
import logging

import numpy as np

from src.enums.corpus import Difficulty, Modality, Role, Split
from src.enums.tokens import SPECIAL_TOKEN_COUNT
from src.errors.core import UsageError
from src.models.config import CorpusConfig
from src.models.corpus import ConceptCodebook, ConceptEntry, Corpus, Instance, PairRecord
from src.utils.helpers import Helpers

pipeline_logger = logging.getLogger("pipeline")

SHORT_CONTENT_LIMIT = 5
EASY_FILLERS = (0, 2)
HARD_FILLERS = (2, 4)


class CorpusService:
    """Builds codebooks and seeded corpora."""

    @staticmethod
    def build_codebook(config: CorpusConfig, seed: int) -> ConceptCodebook:
        """Token layout: specials, modality tags, shuffled concept block, then pools."""
        next_id = SPECIAL_TOKEN_COUNT
        tags = {}
        for modality in Modality:
            tags[modality] = next_id
            next_id += 1

        per_concept = 2 + 2 * config.aliases_per_side
        block = np.arange(next_id, next_id + config.n_concepts * per_concept)
        block = Helpers.rng(seed, "codebook").permutation(block)
        next_id += block.size

        concepts = []
        a = config.aliases_per_side
        for concept in range(config.n_concepts):
            ids = [int(t) for t in block[concept * per_concept : (concept + 1) * per_concept]]
            concepts.append(
                ConceptEntry(
                    concept=concept,
                    surface=ids[0],
                    query_aliases=ids[1 : 1 + a],
                    target_aliases=ids[1 + a : 1 + 2 * a],
                    bridge=ids[-1],
                )
            )

        def take(count: int) -> list[int]:
            nonlocal next_id
            ids = list(range(next_id, next_id + count))
            next_id += count
            return ids

        return ConceptCodebook(
            modality_tags=tags,
            concepts=concepts,
            fillers=take(config.n_fillers),
            distractors=take(config.n_distractors),
            neutral=take(config.n_neutral),
            vocab_used=next_id,
        )

    @staticmethod
    def assign_split(pair_id: str, config: CorpusConfig) -> Split:
        """70/10/20 by default, from a stable hash of the pair id."""
        bucket = Helpers.split_bucket(pair_id)
        if bucket < config.train_percent:
            return Split.train
        if bucket < config.train_percent + config.rl_percent:
            return Split.rl
        return Split.eval

    @staticmethod
    def generate_corpus(
        config: CorpusConfig, seed: int, vocab_size: int | None = None
    ) -> Corpus:
        """Seeded pairs; easy pairs share surface tokens, hard pairs only latent concepts."""
        codebook = CorpusService.build_codebook(config, seed)
        if vocab_size is not None and codebook.vocab_used > vocab_size:
            raise UsageError(
                f"corpus needs {codebook.vocab_used} token ids but vocab_size is {vocab_size}"
            )

        concept_sets = list(itertools.combinations(range(config.n_concepts),
                                                   config.concepts_per_pair))
        order = Helpers.rng(seed, "concept-sets").permutation(len(concept_sets))
        n_hard = int(round(config.hard_fraction * config.n_pairs))
        hard_rank = Helpers.rng(seed, "difficulty").permutation(config.n_pairs)
        hard = set(int(i) for i in hard_rank[:n_hard])

        pairs = []
        for index in range(config.n_pairs):
            pair_id = f"pair-{index:04d}"
            concepts = sorted(concept_sets[int(order[index])])
            difficulty = Difficulty.hard if index in hard else Difficulty.easy
            rng = Helpers.rng(seed, "pair", pair_id)
            query = CorpusService._make_instance(
                pair_id, Role.query, concepts, difficulty, codebook, rng
            )
            target = CorpusService._make_instance(
                pair_id, Role.target, concepts, difficulty, codebook, rng
            )
            pairs.append(
                PairRecord(
                    pair_id=pair_id,
                    query=query,
                    target=target,
                    split=CorpusService.assign_split(pair_id, config),
                )
            )
        pipeline_logger.info(
            f"Generated {len(pairs)} pairs ({n_hard} hard), vocab used {codebook.vocab_used}"
        )
        return Corpus(pairs=pairs, codebook=codebook)

    @staticmethod
    def _make_instance(
        pair_id: str,
        role: Role,
        concepts: list[int],
        difficulty: Difficulty,
        codebook: ConceptCodebook,
        rng: np.random.Generator,
    ) -> Instance:
        if difficulty == Difficulty.easy:
            content = [codebook.entry(c).surface for c in concepts]
            n_fillers = int(rng.integers(EASY_FILLERS[0], EASY_FILLERS[1] + 1))
        else:
            content = []
            for c in concepts:
                entry = codebook.entry(c)
                aliases = entry.query_aliases if role == Role.query else entry.target_aliases
                content.append(int(aliases[int(rng.integers(len(aliases)))]))
            n_fillers = int(rng.integers(HARD_FILLERS[0], HARD_FILLERS[1] + 1))
        content += [int(codebook.fillers[int(i)])
                    for i in rng.integers(len(codebook.fillers), size=n_fillers)]
        content = [int(t) for t in rng.permutation(content)]

        modality = list(Modality)[int(rng.integers(len(Modality)))]
        tag = codebook.modality_tags[modality]
        if modality == Modality.text:
            tokens = [tag, *content]
        elif modality == Modality.image:
            tokens = [*content, tag]
        else:
            tokens = [tag, *content, tag]

        return Instance(
            id=f"{pair_id}-{role.value[0]}",
            role=role,
            tokens=tokens,
            modality_tag=modality,
            latent_concepts=concepts,
            difficulty=difficulty,
            content_length=len(content),
            empty_eligible=difficulty == Difficulty.easy and len(content) < SHORT_CONTENT_LIMIT,
        )

"""Corpus models."""

from pydantic import Field, ValidationInfo, field_validator

from src.enums.corpus import Difficulty, Modality, Role, Split
from src.models.core import CoreModel
from src.utils.validators import Validators


class Instance(CoreModel):
    """One query or target."""

    id: str
    role: Role
    tokens: list[int] = Field(min_length=1)
    modality_tag: Modality
    latent_concepts: list[int] = Field(min_length=1)
    difficulty: Difficulty
    content_length: int = Field(ge=1)
    empty_eligible: bool

    @field_validator("tokens")
    @classmethod
    def no_reserved_tokens(cls, v: list[int]) -> list[int]:
        """Reserved ids never appear as content."""
        if Validators.has_special(v):
            raise ValueError("instance tokens contain reserved ids")
        return v


class PairRecord(CoreModel):
    """A positive query-target pair."""

    pair_id: str
    query: Instance
    target: Instance
    split: Split

    @field_validator("target")
    @classmethod
    def shares_concepts(cls, v: Instance, info: ValidationInfo) -> Instance:
        """Positives share at least one latent concept."""
        query = info.data.get("query")
        if query is not None and not set(query.latent_concepts) & set(v.latent_concepts):
            raise ValueError("query and target share no latent concept")
        return v

    @property
    def difficulty(self) -> Difficulty:
        return self.query.difficulty

    def side(self, role: Role) -> Instance:
        return self.query if role == Role.query else self.target


class ConceptEntry(CoreModel):
    """Surface forms of one latent concept."""

    concept: int
    surface: int
    query_aliases: list[int]
    target_aliases: list[int]
    bridge: int


class ConceptCodebook(CoreModel):
    """Token layout of the synthetic world."""

    modality_tags: dict[Modality, int]
    concepts: list[ConceptEntry]
    fillers: list[int]
    distractors: list[int]
    neutral: list[int]
    vocab_used: int

    def entry(self, concept: int) -> ConceptEntry:
        return self.concepts[concept]


class Corpus(CoreModel):
    """Generated pairs plus the codebook they were drawn from."""

    pairs: list[PairRecord]
    codebook: ConceptCodebook

    def by_split(self, split: Split) -> list[PairRecord]:
        return [p for p in self.pairs if p.split == split]

"""Rationale workers: seeded synthetic profiles and the remote backend."""

import logging
from collections.abc import Sequence

import numpy as np

from src.enums.corpus import Role
from src.enums.pool import LengthRegime
from src.enums.tokens import SpecialToken
from src.errors.backend import MalformedRationaleError
from src.models.config import WorkerProfile
from src.models.corpus import ConceptCodebook, Instance
from src.models.pool import RationaleCandidate
from src.services.third_party.backend_client import BackendClient
from src.utils.helpers import Helpers

request_logger = logging.getLogger("request")

LONG_PADDING = (6, 12)


def candidate_id(pair_id: str, side: Role, source: str, index: int) -> str:
    return f"{pair_id}:{side.value}:{source}:{index}"


def frame_candidate(body: list[int], summary: int) -> list[int]:
    """``<reason> body </reason> <sum> summary``."""
    return [
        SpecialToken.reason.value, *body, SpecialToken.reason_end.value,
        SpecialToken.sum.value, summary,
    ]


class SyntheticWorker:
    """A worker profile over the concept codebook.

    Sees one instance only. Each latent concept's bridge token is recalled
    independently, in codebook order; every emitted token is followed by a
    Poisson number of distractors.
    """

    def __init__(self, profile: WorkerProfile, codebook: ConceptCodebook) -> None:
        """Bind a profile to the world it writes about."""
        self.profile = profile
        self.codebook = codebook

    @property
    def source(self) -> str:
        return self.profile.kind.value

    def compose(self, concepts: Sequence[int], rng: np.random.Generator) -> list[int]:
        """Framed rationale tokens for an instance carrying ``concepts``."""
        neutral = self.codebook.neutral
        distractors = self.codebook.distractors

        def pick(pool: list[int]) -> int:
            return int(pool[int(rng.integers(len(pool)))])

        emitted: list[int] = []
        if self.profile.length_regime == LengthRegime.long:
            low, high = LONG_PADDING
            emitted.extend(pick(neutral) for _ in range(int(rng.integers(low, high + 1))))
        bridges = [
            self.codebook.entry(c).bridge
            for c in sorted(concepts)
            if rng.random() < self.profile.concept_recall
        ]
        emitted.extend(bridges)

        body: list[int] = []
        for token in emitted:
            body.append(token)
            noise = int(rng.poisson(self.profile.noise_rate)) if self.profile.noise_rate else 0
            body.extend(pick(distractors) for _ in range(noise))
        if not body:
            body.append(pick(neutral))
        summary = bridges[0] if bridges else pick(neutral)
        return frame_candidate(body, summary)

    def generate_candidates(
        self, x: Instance, pair_id: str, seed: int, index: int = 0
    ) -> RationaleCandidate:
        """One framed candidate, deterministic per (seed, instance, worker, index)."""
        rng = Helpers.rng(seed, "worker", self.source, x.id, index)
        return RationaleCandidate(
            candidate_id=candidate_id(pair_id, x.role, self.source, index),
            pair_id=pair_id,
            source=self.source,
            side=x.role,
            tokens=self.compose(x.latent_concepts, rng),
        )


class RemoteWorker:
    """Generation through a chat-completions backend."""

    def __init__(self, client: BackendClient, model: str | None = None) -> None:
        """Share one client (and its in-flight limit) across calls."""
        self.client = client
        self.model = model or client.config.model

    @property
    def source(self) -> str:
        return self.model

    async def generate_candidates(
        self, x: Instance, pair_id: str, seed: int, index: int = 0
    ) -> RationaleCandidate | None:
        """Framed candidate, or None when the backend output is malformed."""
        try:
            tokens = await self.client.generate(
                x.tokens, x.role, model=self.model, seed=Helpers.derive_seed(seed, x.id, index)
            )
        except MalformedRationaleError as e:
            request_logger.warning(f"Discarded candidate for {x.id} from {self.model}: {e.message}")
            return None
        return RationaleCandidate(
            candidate_id=candidate_id(pair_id, x.role, self.source, index),
            pair_id=pair_id,
            source=self.source,
            side=x.role,
            tokens=tokens,
        )

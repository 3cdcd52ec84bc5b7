"""Counterfactual evaluators: the synthetic judge and a remote backend."""

import asyncio
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

from src.enums.corpus import Role
from src.models.corpus import ConceptCodebook, Instance
from src.models.pool import RationaleCandidate, ScoredRationale
from src.services.third_party.backend_client import BackendClient

OVERLAP_SLOPE = 3.0
OVERLAP_OFFSET = 1.5


@dataclass
class SideEvidence:
    """Concepts decoded from one side (instance plus optional rationale)."""

    surface: set[int] = field(default_factory=set)
    alias: set[int] = field(default_factory=set)
    bridge: set[int] = field(default_factory=set)
    distractors: int = 0

    @property
    def evidence(self) -> set[int]:
        return self.surface | self.alias | self.bridge


@dataclass(frozen=True)
class JudgeLogits:
    yes: float
    no: float

    @property
    def confidence(self) -> float:
        """log p(YES) - log p(NO) for a two-way softmax over the logits."""
        return self.yes - self.no


class SyntheticJudge:
    """Concept-overlap judge standing in for a multimodal evaluator.

    A concept counts as matched when both sides carry its surface token, or
    when a bridge token for it appears on either side and both sides carry some
    evidence of it. Overlap is matched over all evidenced concepts, mapped
    through ``tanh(3 * o - 1.5)``; each distractor costs a fixed yes-logit
    penalty.
    """

    def __init__(self, codebook: ConceptCodebook, distractor_penalty: float = 0.02) -> None:
        """Index the codebook for decoding."""
        self.codebook = codebook
        self.distractor_penalty = distractor_penalty
        self._decode: dict[int, tuple[str, int]] = {}
        for entry in codebook.concepts:
            self._decode[entry.surface] = ("surface", entry.concept)
            for alias in (*entry.query_aliases, *entry.target_aliases):
                self._decode[alias] = ("alias", entry.concept)
            self._decode[entry.bridge] = ("bridge", entry.concept)
        for token in codebook.distractors:
            self._decode[token] = ("distractor", -1)

    def decode(self, tokens: Sequence[int], rationale: Sequence[int] | None = None) -> SideEvidence:
        side = SideEvidence()
        for token in [*tokens, *(rationale or ())]:
            kind, concept = self._decode.get(int(token), ("none", -1))
            if kind == "surface":
                side.surface.add(concept)
            elif kind == "alias":
                side.alias.add(concept)
            elif kind == "bridge":
                side.bridge.add(concept)
            elif kind == "distractor":
                side.distractors += 1
        return side

    @staticmethod
    def overlap(query: SideEvidence, target: SideEvidence) -> float:
        matched = (query.surface & target.surface) | (
            (query.bridge | target.bridge) & query.evidence & target.evidence
        )
        union = query.evidence | target.evidence
        return len(matched) / len(union) if union else 0.0

    def logits(
        self,
        query_tokens: Sequence[int],
        target_tokens: Sequence[int],
        query_rationale: Sequence[int] | None = None,
        target_rationale: Sequence[int] | None = None,
    ) -> JudgeLogits:
        query = self.decode(query_tokens, query_rationale)
        target = self.decode(target_tokens, target_rationale)
        saturated = math.tanh(OVERLAP_SLOPE * self.overlap(query, target) - OVERLAP_OFFSET)
        penalty = self.distractor_penalty * (query.distractors + target.distractors)
        return JudgeLogits(yes=saturated - penalty, no=-saturated)

    def evaluator_confidence(
        self,
        q: Instance,
        t: Instance,
        rq: Sequence[int] | None = None,
        rt: Sequence[int] | None = None,
    ) -> float:
        """yes_logit - no_logit; an absent rationale and an empty one score the same."""
        return self.logits(q.tokens, t.tokens, rq, rt).confidence

    def score(self, q: Instance, t: Instance, candidate: RationaleCandidate) -> ScoredRationale:
        """Counterfactual scoring with the opposite rationale slot left empty."""
        c0 = self.evaluator_confidence(q, t)
        if candidate.side == Role.query:
            cr = self.evaluator_confidence(q, t, rq=candidate.tokens)
        else:
            cr = self.evaluator_confidence(q, t, rt=candidate.tokens)
        return ScoredRationale(candidate=candidate, c0=c0, cr=cr, delta=cr - c0)

    def counterfactual_gain(self, q: Instance, t: Instance, candidate: RationaleCandidate) -> float:
        """c_r - c_0 for one candidate."""
        return self.score(q, t, candidate).delta


class RemoteJudge:
    """Counterfactual scoring against a chat-completions evaluator."""

    def __init__(self, client: BackendClient) -> None:
        """Share the caller's client."""
        self.client = client

    async def score(
        self, q: Instance, t: Instance, candidate: RationaleCandidate
    ) -> ScoredRationale:
        rq = candidate.tokens if candidate.side == Role.query else None
        rt = candidate.tokens if candidate.side == Role.target else None
        c0, cr = await asyncio.gather(
            self.client.confidence(q.tokens, t.tokens),
            self.client.confidence(q.tokens, t.tokens, rq, rt),
        )
        return ScoredRationale(candidate=candidate, c0=c0, cr=cr, delta=cr - c0)

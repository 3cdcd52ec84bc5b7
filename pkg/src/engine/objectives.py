"""Training objectives: in-batch InfoNCE, chain-of-thought NLL and their combination."""

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from src.engine import autodiff as ad
from src.engine.autodiff import Node
from src.engine.encoder import EncoderState, token_logprobs
from src.enums.tokens import SpecialToken
from src.errors.core import UsageError
from src.errors.numerical import ShapeError
from src.models.config import LossWeights
from src.utils.formatters import Formatters

UNIT_TOLERANCE = 1e-9
EMPTY_RATIONALE = [SpecialToken.empty.value]


@dataclass
class BatchEmbeddings:
    """Row-aligned query and target embeddings, (N, d) each."""

    queries: Node
    targets: Node
    mode: Literal["direct", "reasoning"]

    @classmethod
    def from_rows(
        cls, queries: Sequence[Node], targets: Sequence[Node], mode: Literal["direct", "reasoning"]
    ) -> "BatchEmbeddings":
        return cls(queries=ad.stack(queries), targets=ad.stack(targets), mode=mode)

    def validate(self) -> None:
        if self.queries.value.ndim != 2 or self.queries.shape != self.targets.shape:
            raise ShapeError("infonce", f"{self.queries.shape} vs {self.targets.shape}")
        if self.queries.shape[0] < 1:
            raise ShapeError("infonce", "empty batch")
        for block in (self.queries.value, self.targets.value):
            norms = np.sqrt(np.sum(block * block, axis=1))
            if np.any(np.abs(norms - 1.0) > UNIT_TOLERANCE):
                raise UsageError("batch embeddings must be unit-norm")


def infonce(batch: BatchEmbeddings, tau: float) -> Node:
    """-(1/N) sum_k log softmax_j(q_k . t_j / tau)[k]."""
    if tau <= 0:
        raise UsageError("tau must be positive")
    batch.validate()
    n = batch.queries.shape[0]
    sims = ad.matmul(batch.queries, ad.transpose(batch.targets))
    log_probs = ad.row_log_softmax(ad.scale(sims, 1.0 / tau))
    return ad.scale(ad.mean_all(ad.pick(log_probs, range(n), range(n))), -1.0)


def cot_nll(
    state: EncoderState,
    x: Sequence[int],
    r: Sequence[int],
    reduction: Literal["sum", "mean"] = "sum",
) -> Node:
    """Negative log-likelihood of rationale tokens given ``x`` (input tokens masked).

    A nonempty ``r`` is framed the way the encoder consumes it; an empty ``r``
    contributes zero.
    """
    if not r:
        return ad.constant(0.0)
    rationale = Formatters.frame_rationale(r)
    logprobs = token_logprobs(state, x, rationale)
    total = ad.sum_all(logprobs) if reduction == "sum" else ad.mean_all(logprobs)
    return ad.scale(total, -1.0)


def joint_loss(
    reason_batch: BatchEmbeddings,
    direct_batch: BatchEmbeddings,
    cot_terms: Sequence[Node],
    weights: LossWeights,
) -> tuple[Node, dict[str, float]]:
    """Weighted sum of L_reason, mean(cot) and L_direct, plus the unweighted parts.

    ``lambda_reason = 0`` trains the direct mode only.
    """
    reason = infonce(reason_batch, weights.tau)
    direct = infonce(direct_batch, weights.tau)
    cot = ad.mean_all(ad.stack(cot_terms)) if cot_terms else ad.constant(0.0)
    total = ad.add(
        ad.add(ad.scale(reason, weights.lambda_reason), ad.scale(cot, weights.lambda_cot)),
        ad.scale(direct, weights.lambda_direct),
    )
    parts = {
        "reason": reason.item(),
        "cot": cot.item(),
        "direct": direct.item(),
        "total": total.item(),
    }
    return total, parts

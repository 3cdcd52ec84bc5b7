"""Joint Trainer Service: contrastive + chain-of-thought training and gradient audit."""

import json
import logging
import math
import time
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from src.engine import autodiff as ad
from src.engine.autodiff import Node
from src.engine.encoder import EncoderState, encode
from src.engine.objectives import EMPTY_RATIONALE, BatchEmbeddings, joint_loss
from src.engine.optim import adam_step, cosine_lr
from src.enums.corpus import Role
from src.enums.tokens import SPECIAL_TOKEN_COUNT
from src.errors.core import UsageError
from src.errors.numerical import NonFiniteError
from src.models.config import LossWeights, TrainConfig
from src.models.corpus import PairRecord
from src.models.core import ProvenanceHeader
from src.models.pool import ReasoningPoolEntry
from src.models.training import GradcheckReport, StepLog, TensorGradError, TrainReport
from src.storage.repositories.checkpoint import CheckpointRepository
from src.utils.formatters import Formatters
from src.utils.helpers import Helpers

pipeline_logger = logging.getLogger("pipeline")

GRADCHECK_TOLERANCE = 1e-5
GRADCHECK_MAX_PARAMETERS = 5000
NONFINITE_BATCH_FILE = "nonfinite_batch.json"


@dataclass(frozen=True)
class TrainingExample:
    """Both sides of one pair with the rationales drawn for this epoch."""

    pair_id: str
    query: list[int]
    query_rationale: list[int]
    target: list[int]
    target_rationale: list[int]


def batch_loss(
    state: EncoderState, batch: Sequence[TrainingExample], weights: LossWeights
) -> tuple[Node, dict[str, float]]:
    """Joint loss over one batch from a single fused forward per instance."""
    reason_q, reason_t, direct_q, direct_t, cot_terms = [], [], [], [], []
    for example in batch:
        for x, r, reason_rows, direct_rows in (
            (example.query, example.query_rationale, reason_q, direct_q),
            (example.target, example.target_rationale, reason_t, direct_t),
        ):
            encoded = encode(state, Formatters.direct_input(x), r)
            reason_rows.append(encoded.z_reason)
            direct_rows.append(encoded.z_direct)
            # per-token mean NLL of the framed rationale
            cot_terms.append(ad.scale(ad.mean_all(encoded.rationale_logprobs), -1.0))
    return joint_loss(
        BatchEmbeddings.from_rows(reason_q, reason_t, "reasoning"),
        BatchEmbeddings.from_rows(direct_q, direct_t, "direct"),
        cot_terms,
        weights,
    )


class JointTrainerService:
    """Stage-2 training over the weighted reasoning pool."""

    @staticmethod
    def draw_examples(
        pairs: Sequence[PairRecord],
        entries: Sequence[ReasoningPoolEntry],
        config: TrainConfig,
        seed: int,
        epoch: int,
    ) -> list[TrainingExample]:
        """One rationale combination per pair, drawn by joint weight.

        Direct-only pairs (and pairs missing from the pool) train on ``<empty>``
        both sides; short instances are swapped to ``<empty>`` with
        ``empty_injection_prob``.
        """
        by_pair: dict[str, list[ReasoningPoolEntry]] = defaultdict(list)
        for entry in entries:
            by_pair[entry.pair_id].append(entry)

        examples = []
        for pair in pairs:
            options = [e for e in by_pair.get(pair.pair_id, []) if not e.direct_only]
            rationales = {Role.query: EMPTY_RATIONALE, Role.target: EMPTY_RATIONALE}
            if options:
                rng = Helpers.rng(seed, "joint-sample", epoch, pair.pair_id)
                probs = np.array([e.weight for e in options])
                chosen = options[int(rng.choice(len(options), p=probs / probs.sum()))]
                for side in (Role.query, Role.target):
                    rationales[side] = chosen.rationale_tokens(side)
                    if pair.side(side).empty_eligible:
                        coin = Helpers.rng(seed, "joint-empty", epoch, pair.pair_id, side.value)
                        if coin.random() < config.empty_injection_prob:
                            rationales[side] = EMPTY_RATIONALE
            examples.append(
                TrainingExample(
                    pair_id=pair.pair_id,
                    query=list(pair.query.tokens),
                    query_rationale=list(rationales[Role.query]),
                    target=list(pair.target.tokens),
                    target_rationale=list(rationales[Role.target]),
                )
            )
        return examples

    @staticmethod
    def batches(
        examples: Sequence[TrainingExample], batch_size: int, seed: int, epoch: int
    ) -> list[list[TrainingExample]]:
        """Seeded shuffle into batches; a trailing singleton is dropped."""
        order = Helpers.rng(seed, "joint-order", epoch).permutation(len(examples))
        shuffled = [examples[int(i)] for i in order]
        chunks = [shuffled[i : i + batch_size] for i in range(0, len(shuffled), batch_size)]
        return [chunk for chunk in chunks if len(chunk) >= 2]

    @staticmethod
    def steps_per_epoch(n_examples: int, batch_size: int) -> int:
        full, rest = divmod(n_examples, batch_size)
        return full + (1 if rest >= 2 else 0)

    @staticmethod
    def train_joint(
        state: EncoderState,
        pairs: Sequence[PairRecord],
        entries: Sequence[ReasoningPoolEntry],
        config: TrainConfig,
        seed: int,
        checkpoints: CheckpointRepository | None = None,
        header: ProvenanceHeader | None = None,
    ) -> tuple[EncoderState, TrainReport]:
        """Train in place and return the state with its report.

        Checkpoints are written as ``epoch-N`` after every epoch, plus
        ``final``. A non-finite loss persists the offending batch next to the
        checkpoints before raising.
        """
        started = time.perf_counter()
        report = TrainReport(epochs=config.epochs, parameter_count=state.parameter_count)
        if config.epochs == 0:
            return state, report
        if not entries:
            raise UsageError("reasoning pool is empty")
        if len(pairs) < 2:
            raise UsageError("joint training needs at least two pairs")

        per_epoch = JointTrainerService.steps_per_epoch(len(pairs), config.batch_size)
        total_steps = per_epoch * config.epochs
        report.steps_per_epoch = per_epoch
        step = 0
        for epoch in range(config.epochs):
            examples = JointTrainerService.draw_examples(pairs, entries, config, seed, epoch)
            for batch in JointTrainerService.batches(examples, config.batch_size, seed, epoch):
                lr = cosine_lr(step, total_steps, config.learning_rate, config.warmup_ratio)
                try:
                    loss, parts = batch_loss(state, batch, config.loss)
                    if not math.isfinite(parts["total"]):
                        raise NonFiniteError("joint_loss", f"step {step}")
                    ad.backward(loss)
                except NonFiniteError:
                    JointTrainerService._persist_batch(checkpoints, epoch, step, batch)
                    raise
                norm = ad.grad_norm(state.parameters())
                adam_step(state, lr, config.beta1, config.beta2, config.adam_eps,
                          config.weight_decay)
                report.steps.append(StepLog(epoch=epoch, step=step, lr=lr, grad_norm=norm, **parts))
                step += 1
            last = report.steps[-1] if report.steps else None
            pipeline_logger.info(
                f"Epoch {epoch + 1}/{config.epochs} done"
                + (f", loss {last.total:.4f}" if last else "")
            )
            if checkpoints is not None and header is not None:
                path = checkpoints.save(f"epoch-{epoch + 1}", state, header)
                report.checkpoints.append(str(path))
        if checkpoints is not None and header is not None:
            report.final_checkpoint = str(checkpoints.save("final", state, header))
        report.wall_time_s = time.perf_counter() - started
        return state, report

    @staticmethod
    def _persist_batch(
        checkpoints: CheckpointRepository | None,
        epoch: int,
        step: int,
        batch: Sequence[TrainingExample],
    ) -> None:
        if checkpoints is None:
            return
        path = checkpoints.path(NONFINITE_BATCH_FILE)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"epoch": epoch, "step": step, "batch": [vars(e) for e in batch]}
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        pipeline_logger.error(f"Non-finite loss at step {step}; batch written to {path}")

    @staticmethod
    def tiny_batch(state: EncoderState, seed: int = 0, size: int = 2) -> list[TrainingExample]:
        """Short seeded examples inside the encoder's vocabulary."""
        rng = Helpers.rng(seed, "gradcheck-batch")
        low, high = SPECIAL_TOKEN_COUNT, state.config.vocab_size

        def tokens(n: int) -> list[int]:
            return [int(t) for t in rng.integers(low, high, size=n)]

        examples = []
        for i in range(size):
            examples.append(
                TrainingExample(
                    pair_id=f"tiny-{i}",
                    query=tokens(3),
                    query_rationale=tokens(2) if i % 2 == 0 else EMPTY_RATIONALE,
                    target=tokens(4),
                    target_rationale=tokens(3),
                )
            )
        return examples

    @staticmethod
    def gradcheck(
        state: EncoderState,
        batch: Sequence[TrainingExample],
        weights: LossWeights | None = None,
        entries_per_tensor: int | None = None,
        seed: int = 0,
        h: float = 1e-5,
    ) -> GradcheckReport:
        """Analytic vs central-difference gradients of the joint loss, per tensor.

        ``entries_per_tensor`` subsamples entries (seeded) for quick checks. Errors
        are relative per tensor with a 1e-3 floor (see ``autodiff.relative_error``),
        so a tensor with only vanishing gradients passes below 1e-8 absolute.
        """
        if state.parameter_count > GRADCHECK_MAX_PARAMETERS:
            raise UsageError(
                f"gradcheck needs at most {GRADCHECK_MAX_PARAMETERS} parameters, "
                f"encoder has {state.parameter_count}"
            )
        weights = weights or LossWeights()

        def loss_fn() -> Node:
            return batch_loss(state, batch, weights)[0]

        state.zero_grad()
        loss = loss_fn()
        ad.backward(loss)
        analytic = {name: p.grad.copy() for name, p in state.params.items()}
        state.zero_grad()

        tensors = []
        for name, param in state.params.items():
            entries = JointTrainerService._entries(param.value.size, entries_per_tensor, seed, name)
            numeric = ad.numerical_gradient(loss_fn, param, h=h, entries=entries)
            flat_a = analytic[name].reshape(-1)[entries]
            flat_n = numeric.reshape(-1)[entries]
            tensors.append(
                TensorGradError(
                    name=name,
                    shape=list(param.shape),
                    entries_checked=len(entries),
                    max_rel_error=ad.relative_error(flat_a, flat_n),
                )
            )
        worst = max(t.max_rel_error for t in tensors)
        pipeline_logger.info(f"Gradcheck max relative error {worst:.3e}")
        return GradcheckReport(
            parameter_count=state.parameter_count,
            loss=loss.item(),
            tensors=tensors,
            max_rel_error=worst,
            tolerance=GRADCHECK_TOLERANCE,
            passed=worst <= GRADCHECK_TOLERANCE,
        )

    @staticmethod
    def _entries(size: int, limit: int | None, seed: int, name: str) -> list[int]:
        if limit is None or limit >= size:
            return list(range(size))
        picked = Helpers.rng(seed, "gradcheck-entries", name).choice(size, limit, replace=False)
        return sorted(int(i) for i in picked)


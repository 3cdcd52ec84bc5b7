"""Adam with bias correction, decoupled weight decay and a warmup-cosine schedule."""

import math

import numpy as np

from src.engine import autodiff as ad
from src.engine.encoder import EncoderState
from src.errors.numerical import NonFiniteError


def warmup_steps(total_steps: int, warmup_ratio: float) -> int:
    if total_steps <= 0 or warmup_ratio <= 0:
        return 0
    return max(1, math.ceil(warmup_ratio * total_steps))


def cosine_lr(step: int, total_steps: int, peak_lr: float, warmup_ratio: float) -> float:
    """Learning rate for 0-based ``step``.

    Linear ramp to ``peak_lr`` over the warmup steps, then cosine decay that
    reaches zero on the last step.
    """
    warmup = warmup_steps(total_steps, warmup_ratio)
    if step < warmup:
        return peak_lr * (step + 1) / warmup
    decay_steps = total_steps - warmup
    if decay_steps <= 0:
        return peak_lr
    progress = min(1.0, (step - warmup + 1) / decay_steps)
    return peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def adam_step(
    state: EncoderState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """One in-place update from the gradients accumulated on the parameters."""
    state.step += 1
    t = state.step
    correction1 = 1.0 - beta1**t
    correction2 = 1.0 - beta2**t
    for name, param in state.params.items():
        grad = param.grad
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        update = lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        if weight_decay:
            update = update + lr * weight_decay * param.value
        param.value -= update
        if not np.all(np.isfinite(param.value)):
            raise NonFiniteError("adam_step", f"parameter {name} became non-finite")
    ad.zero_grad(state.params.values())

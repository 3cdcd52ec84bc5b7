"""Joint training models."""

from pydantic import Field

from src.models.core import CoreModel


class StepLog(CoreModel):
    """Loss components and optimizer state after one step."""

    epoch: int
    step: int
    lr: float
    reason: float
    cot: float
    direct: float
    total: float
    grad_norm: float


class TrainReport(CoreModel):
    epochs: int = 0
    steps_per_epoch: int = 0
    steps: list[StepLog] = Field(default_factory=list)
    checkpoints: list[str] = Field(default_factory=list)
    final_checkpoint: str | None = None
    wall_time_s: float = 0.0
    parameter_count: int = 0


class TensorGradError(CoreModel):
    """Analytic vs central-difference agreement for one parameter tensor."""

    name: str
    shape: list[int]
    entries_checked: int
    max_rel_error: float


class GradcheckReport(CoreModel):
    parameter_count: int
    loss: float
    tensors: list[TensorGradError]
    max_rel_error: float
    tolerance: float
    passed: bool

"""Training configuration"""

from dataclasses import dataclass, field
from typing import Optional

from layers.neuron_mode import EXACT, LSE, PNORM
from utils.errors import ParameterError


@dataclass
class TrainConfig:
    """Everything the training loop needs besides the datasets"""
    # schedule
    epochs: int = 10
    batch_size: int = 64
    seed: int = 0
    warmup_epochs: int = 0

    # loss
    loss: str = "hinge"
    hinge_margin: float = 0.0  # 0 means 2 * epsilon
    ce_scale: float = 8.0
    ce_warmup_fraction: float = 0.0
    epsilon: float = 0.3

    # p-annealing
    surrogate: str = PNORM
    p_start: float = 8.0
    p_end: float = 1000.0
    p_exact_from_epoch: int = -1  # -1 means last 20% of epochs are Exact

    # EMA (None disables)
    ema_decay: Optional[float] = 0.99

    # augmentation
    augment: str = "none"
    waug_pad: int = 1
    waug_flip: bool = False

    # optimizer
    optimizer: str = "adamw"
    lr: float = 0.003
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    madam_lr: float = 0.01
    madam_clip: float = 3.0

    # architecture
    arch: str = "mlp"
    hidden_widths: list = field(default_factory=lambda: [128, 128, 128])
    head_widths: list = field(default_factory=list)
    residual_c: Optional[float] = None
    init_low: float = 0.0
    init_high: float = 1.0

    # per-epoch evaluation
    eval_limit: int = 1000
    metrics_attack_steps: int = 0

    def validate(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ParameterError(f"epochs and batch_size must be >= 1, got {self.epochs}, {self.batch_size}")
        if self.loss not in ("hinge", "ce"):
            raise ParameterError(f"Unknown loss: {self.loss}")
        if self.surrogate not in (EXACT, PNORM, LSE):
            raise ParameterError(f"Unknown surrogate: {self.surrogate}")
        if not 0 < self.p_start <= self.p_end:
            raise ParameterError(f"Need 0 < p_start <= p_end, got {self.p_start}, {self.p_end}")
        if self.surrogate == PNORM and self.p_start <= 1:
            raise ParameterError(f"PNorm annealing needs p_start > 1, got {self.p_start}")
        if self.resolved_p_exact_from_epoch() > self.epochs:
            raise ParameterError(f"p_exact_from_epoch {self.p_exact_from_epoch} exceeds epochs {self.epochs}")
        if self.ema_decay is not None and not 0.0 <= self.ema_decay < 1.0:
            raise ParameterError(f"EMA decay must lie in [0, 1), got {self.ema_decay}")
        if self.augment not in ("none", "waug"):
            raise ParameterError(f"Unknown augmentation: {self.augment}")
        if self.waug_pad < 0:
            raise ParameterError(f"waug_pad must be >= 0, got {self.waug_pad}")
        if not 0.0 <= self.ce_warmup_fraction <= 1.0:
            raise ParameterError(f"ce_warmup_fraction must lie in [0, 1], got {self.ce_warmup_fraction}")
        if self.epsilon < 0:
            raise ParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        return self

    def resolved_p_exact_from_epoch(self):
        if self.p_exact_from_epoch >= 0:
            return self.p_exact_from_epoch
        return self.epochs - max(1, int(round(0.2 * self.epochs)))

    def resolved_hinge_margin(self):
        margin = self.hinge_margin if self.hinge_margin > 0 else 2.0 * self.epsilon
        if not margin > 0:
            raise ParameterError("Hinge margin resolves to 0; set hinge_margin or epsilon > 0")
        return margin

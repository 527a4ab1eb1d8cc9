"""Projected gradient descent under an l_inf budget"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import softmax

from numcore.rng import Rng
from numcore.tensor import as_batch
from utils.errors import ParameterError
from utils.net_types import PGD_EVAL_DEFAULTS, PGD_SOUNDNESS_DEFAULTS
from utils.parallel import EVAL_CHUNK, map_chunks

# Probability floor when differentiating -log P_y of a Voting ensemble
PROB_FLOOR = 1e-300


@dataclass
class AttackConfig:
    """PGD budget and schedule

    step_size defaults to epsilon / 4.
    """
    epsilon: float
    steps: int = PGD_EVAL_DEFAULTS["steps"]
    step_size: Optional[float] = None
    restarts: int = PGD_EVAL_DEFAULTS["restarts"]
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ParameterError(f"Attack epsilon must be >= 0, got {self.epsilon}")
        if self.steps < 1:
            raise ParameterError(f"Attack steps must be >= 1, got {self.steps}")
        if self.restarts < 1:
            raise ParameterError(f"Attack restarts must be >= 1, got {self.restarts}")
        if self.step_size is None:
            # With epsilon 0 the ball is a single point and any step projects back
            self.step_size = self.epsilon / 4.0 if self.epsilon > 0 else 1.0
        if not self.step_size > 0:
            raise ParameterError(f"Attack step size must be > 0, got {self.step_size}")

    @classmethod
    def soundness(cls, epsilon, seed=0):
        """Heavier budget used to cross-check certificates"""
        return cls(epsilon, steps=PGD_SOUNDNESS_DEFAULTS["steps"],
                   restarts=PGD_SOUNDNESS_DEFAULTS["restarts"], seed=seed)

    def with_epsilon(self, epsilon):
        """Same schedule at another budget; the step size keeps its ratio to epsilon"""
        ratio = self.step_size / self.epsilon if self.epsilon > 0 else 0.25
        step = ratio * epsilon if epsilon > 0 else None
        return AttackConfig(epsilon, self.steps, step, self.restarts, self.seed)


def loss_gradient(model, x, y):
    """Input gradient of the attack loss

    Logit models use cross-entropy; probability outputs (Voting) use -log P_y.
    """
    out = model.forward(x)
    rows = np.arange(len(y))
    if getattr(model, "outputs_probabilities", False):
        upstream = np.zeros_like(out)
        upstream[rows, y] = -1.0 / np.maximum(out[rows, y], PROB_FLOOR)
    else:
        upstream = softmax(out, axis=1)
        upstream[rows, y] -= 1.0
    return model.input_gradient(x, upstream)


def _start_noise(root, restart, rows, d, epsilon):
    """Uniform start offsets, one stream per (restart, row index in X)"""
    return np.stack([root.spawn((restart << 32) | int(row)).uniform_array(d, -epsilon, epsilon) for row in rows])


def pgd_batch(model, X, Y, cfg, threads=1, chunk=EVAL_CHUNK):
    """Attack every row of X

    Rows misclassified without perturbation count as successes with x' = x.
    Each (restart, row) pair draws its start from its own stream of
    Rng(cfg.seed), keyed by the row index in X, so results do not depend on
    chunk size or thread count. A row stops at the first iterate whose
    prediction differs from its label.

    Returns:
        tuple: (success mask, adversarial inputs; unsuccessful rows hold x)
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.int64)
    root = Rng(cfg.seed)
    index = np.arange(len(X))

    def attack_chunk(x, y, idx):
        success = model.predict(x) != y
        adv = x.copy()
        lo = np.clip(x - cfg.epsilon, 0.0, 1.0)
        hi = np.clip(x + cfg.epsilon, 0.0, 1.0)
        for restart in range(cfg.restarts):
            active = np.flatnonzero(~success)
            if active.size == 0 or cfg.epsilon == 0:
                break
            xa = np.clip(x[active] + _start_noise(root, restart, idx[active], x.shape[1], cfg.epsilon), 0.0, 1.0)
            for step in range(cfg.steps + 1):
                flipped = model.predict(xa) != y[active]
                if np.any(flipped):
                    hit = active[flipped]
                    adv[hit] = xa[flipped]
                    success[hit] = True
                    keep = ~flipped
                    active, xa = active[keep], xa[keep]
                if active.size == 0 or step == cfg.steps:
                    break
                grad = loss_gradient(model, xa, y[active])
                xa = np.clip(xa + cfg.step_size * np.sign(grad), lo[active], hi[active])
        return success, adv

    return map_chunks(attack_chunk, [X, Y, index], threads, chunk)


def pgd_attack(model, x, y, cfg):
    """Adversarial input within the epsilon ball of x, or None if none was found"""
    batch, _ = as_batch(x, model.in_width)
    success, adv = pgd_batch(model, batch, np.array([y]), cfg)
    return adv[0] if success[0] else None

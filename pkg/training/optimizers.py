"""AdamW and MAdam optimizers over a list of parameter arrays

Both update the arrays in place so the network sees the new values.
"""

import numpy as np

from numcore.tensor import check_same_shape
from utils.errors import NumericError, ParameterError


def _check_grads(params, grads, names):
    if len(params) != len(grads):
        raise ParameterError(f"Got {len(grads)} gradients for {len(params)} parameters")
    for idx, (p, g) in enumerate(zip(params, grads)):
        name = names[idx] if names else f"param_{idx}"
        check_same_shape(p, g, name, f"{name} gradient")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"Non-finite gradient for {name}", location=name)


class AdamW:
    """Adam with decoupled weight decay

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
    theta <- theta - lr*m_hat/(sqrt(v_hat)+eps) - lr*wd*theta
    """

    def __init__(self, params, lr=0.003, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0, names=None):
        if not lr >= 0:
            raise ParameterError(f"Invalid learning rate: {lr}")
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ParameterError(f"Invalid betas: ({beta1}, {beta2})")
        if not eps > 0 or not weight_decay >= 0:
            raise ParameterError(f"Invalid eps/weight decay: {eps}, {weight_decay}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.names = names
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads, lr=None):
        lr = self.lr if lr is None else lr
        _check_grads(params, grads, self.names)
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p -= lr * update + lr * self.weight_decay * p
        return params


class MAdam:
    """Multiplicative Adam: theta <- theta * exp(-clip(lr*sign(theta)*g/(sqrt(v_hat)+eps)))

    Zero-valued parameters stay at zero; sign(0) counts as +1.
    """

    def __init__(self, params, lr=0.01, beta2=0.999, eps=1e-8, clip=3.0, names=None):
        if not lr >= 0:
            raise ParameterError(f"Invalid learning rate: {lr}")
        if not 0.0 <= beta2 < 1.0:
            raise ParameterError(f"Invalid beta2: {beta2}")
        if not clip > 0:
            raise ParameterError(f"Clip must be positive, got {clip}")
        self.lr = lr
        self.beta2 = beta2
        self.eps = eps
        self.clip = clip
        self.names = names
        self.step_count = 0
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads, lr=None):
        lr = self.lr if lr is None else lr
        _check_grads(params, grads, self.names)
        self.step_count += 1
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, g, v in zip(params, grads, self.v):
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            sign = np.where(p >= 0, 1.0, -1.0)
            exponent = np.clip(lr * sign * g / (np.sqrt(v / bc2) + self.eps), -self.clip, self.clip)
            p *= np.exp(-exponent)
        return params


def adamw_step(state, params, grads):
    """One AdamW update; returns (params, state)"""
    state.step(params, grads)
    return params, state


def madam_step(state, params, grads):
    """One MAdam update; returns (params, state)"""
    state.step(params, grads)
    return params, state


def make_optimizer(name, params, cfg, names=None):
    """Build the optimizer named in the training config"""
    if name == "adamw":
        return AdamW(params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps,
                     weight_decay=cfg.weight_decay, names=names)
    if name == "madam":
        return MAdam(params, lr=cfg.madam_lr, beta2=cfg.beta2, eps=cfg.adam_eps, clip=cfg.madam_clip, names=names)
    raise ParameterError(f"Unknown optimizer: {name}")

"""Exponential moving average of parameters (evaluation-only shadow)"""

from dataclasses import dataclass, field

import numpy as np

from numcore.tensor import check_same_shape
from utils.errors import ParameterError, ShapeError


@dataclass
class EmaState:
    """Shadow parameters theta' and decay tau"""
    shadow: list = field(default_factory=list)
    decay: float = 0.99

    def __post_init__(self):
        if not 0.0 <= self.decay < 1.0:
            raise ParameterError(f"EMA decay must lie in [0, 1), got {self.decay}")

    @classmethod
    def from_params(cls, params, decay=0.99):
        """Start the shadow as a copy of the current parameters"""
        return cls([np.array(p, dtype=np.float64, copy=True) for p in params], decay)


def ema_update(ema, params):
    """theta' <- tau*theta' + (1 - tau)*theta, element-wise, no bias correction"""
    if len(params) != len(ema.shadow):
        raise ShapeError(f"EMA tracks {len(ema.shadow)} arrays, got {len(params)}")
    tau = ema.decay
    for idx, (s, p) in enumerate(zip(ema.shadow, params)):
        check_same_shape(s, p, f"shadow[{idx}]", f"param[{idx}]")
        s *= tau
        s += (1.0 - tau) * p
    return ema

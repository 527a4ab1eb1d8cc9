"""Distance-neuron evaluation modes"""

from dataclasses import dataclass
from typing import Optional

from utils.errors import ParameterError
from utils.net_types import NEURON_MODES

EXACT = "exact"
PNORM = "pnorm"
LSE = "lse"


@dataclass(frozen=True)
class NeuronMode:
    """Exact l_inf distance, or one of its smooth surrogates with parameter p"""
    kind: str = EXACT
    p: Optional[float] = None

    def __post_init__(self):
        if self.kind == EXACT:
            if self.p is not None:
                raise ParameterError("Exact mode takes no parameter")
        elif self.kind == PNORM:
            if self.p is None or not self.p > 1:
                raise ParameterError(f"PNorm mode needs p > 1, got {self.p}")
        elif self.kind == LSE:
            if self.p is None or not self.p > 0:
                raise ParameterError(f"LogSumExp mode needs p > 0, got {self.p}")
        else:
            raise ParameterError(f"Unknown neuron mode: {self.kind} (expected one of {', '.join(NEURON_MODES)})")

    @property
    def is_exact(self):
        return self.kind == EXACT

    def describe(self):
        """Text form used in model descriptors and metrics, e.g. 'pnorm:8.0'"""
        return self.kind if self.is_exact else f"{self.kind}:{self.p!r}"


def Exact():
    return NeuronMode(EXACT)


def PNorm(p):
    return NeuronMode(PNORM, float(p))


def LogSumExp(p):
    return NeuronMode(LSE, float(p))


def parse_mode(text):
    """Inverse of NeuronMode.describe"""
    kind, _, value = str(text).strip().partition(":")
    kind = kind.lower()
    if kind == EXACT:
        if value:
            raise ParameterError("Exact mode takes no parameter")
        return Exact()
    if not value:
        raise ParameterError(f"Mode '{kind}' needs a parameter, e.g. {kind}:8")
    try:
        p = float(value)
    except ValueError:
        raise ParameterError(f"Bad mode parameter: {value}") from None
    return NeuronMode(kind, p)

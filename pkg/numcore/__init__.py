"""Tensor helpers, deterministic random numbers and gradient checking"""

from numcore.grad_check import GradCheckReport, grad_check
from numcore.rng import Rng, rng_uniform
from numcore.tensor import as_batch, as_tensor, check_finite, check_same_shape, flat_offset

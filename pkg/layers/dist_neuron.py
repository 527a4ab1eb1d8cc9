"""l_inf-distance neurons and their smooth surrogates

All functions work on a ``diff = z - w`` array whose last axis is the neuron
input, so one call evaluates a whole layer over a whole batch.
"""

import numpy as np
from scipy.special import logsumexp, softmax

from layers.neuron_mode import EXACT, LSE, PNORM, Exact
from numcore.tensor import as_tensor
from utils.errors import ParameterError, ShapeError

# Coordinates within this of the max count as tied
TIE_TOLERANCE = 1e-6


def distance(diff, mode):
    """Distance of each row of diff to zero under mode (bias not included)"""
    a = np.abs(diff)
    m = a.max(axis=-1)
    if mode.kind == EXACT:
        return m
    if mode.kind == PNORM:
        safe = np.where(m > 0, m, 1.0)[..., None]
        s = ((a / safe) ** mode.p).sum(axis=-1)
        return m * s ** (1.0 / mode.p)
    if mode.kind == LSE:
        # m + log(sum exp(p(a - m)))/p: the shifted exponents are <= 0
        return m + logsumexp(mode.p * (a - m[..., None]), axis=-1) / mode.p
    raise ParameterError(f"Unknown neuron mode: {mode.kind}")


def distance_grad(diff, mode):
    """Gradient of distance() with respect to diff

    Exact mode returns the one-hot subgradient at the lowest-index argmax.
    """
    a = np.abs(diff)
    sign = np.sign(diff)
    if mode.kind == EXACT:
        k = np.argmax(a, axis=-1)[..., None]
        grad = np.zeros_like(diff)
        np.put_along_axis(grad, k, np.take_along_axis(sign, k, axis=-1), axis=-1)
        return grad
    if mode.kind == PNORM:
        m = a.max(axis=-1, keepdims=True)
        safe = np.where(m > 0, m, 1.0)
        r = a / safe
        s = (r ** mode.p).sum(axis=-1, keepdims=True)
        s = np.where(s > 0, s, 1.0)
        return (r / s ** (1.0 / mode.p)) ** (mode.p - 1.0) * sign
    if mode.kind == LSE:
        return softmax(mode.p * a, axis=-1) * sign
    raise ParameterError(f"Unknown neuron mode: {mode.kind}")


def tie_mask(diff, tol=TIE_TOLERANCE):
    """Coordinates involved in an l_inf tie (two or more near the max)"""
    a = np.abs(diff)
    near = a >= a.max(axis=-1, keepdims=True) - tol
    tied = near.sum(axis=-1, keepdims=True) > 1
    return near & tied


def _vector_pair(z, w):
    z = as_tensor(z, name="z")
    w = as_tensor(w, name="w")
    if z.ndim != 1 or z.shape != w.shape or z.size < 1:
        raise ShapeError(f"z and w must be equal-length non-empty vectors, got {z.shape} and {w.shape}")
    return z, w


def dist_neuron_forward(z, w, b, mode):
    """u(z) = dist_mode(z - w) + b"""
    z, w = _vector_pair(z, w)
    return float(distance(z - w, mode) + b)


def dist_neuron_grad(z, w, b, mode):
    """Gradients (dz, dw, db) of dist_neuron_forward"""
    z, w = _vector_pair(z, w)
    dz = distance_grad(z - w, mode)
    return dz, -dz, 1.0


def residual_unit_forward(z, w, b, c, j, mode=None):
    """u(z) = c*z_j + (1 - c)*dist(z - w) + b, skip taken from coordinate j"""
    z, w = _vector_pair(z, w)
    if not 0.0 <= c < 1.0:
        raise ParameterError(f"Residual weight c must lie in [0, 1), got {c}")
    if not 0 <= j < z.size:
        raise ShapeError(f"Skip index {j} out of range for width {z.size}")
    mode = mode or Exact()
    return float(c * z[j] + (1.0 - c) * distance(z - w, mode) + b)


def residual_unit_grad(z, w, b, c, j, mode=None):
    """Gradients (dz, dw, db) of residual_unit_forward"""
    z, w = _vector_pair(z, w)
    mode = mode or Exact()
    g = (1.0 - c) * distance_grad(z - w, mode)
    dz = g.copy()
    dz[j] += c
    return dz, -g, 1.0

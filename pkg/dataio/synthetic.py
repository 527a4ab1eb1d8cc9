"""Synthetic hypercube-corner datasets with a guaranteed class gap"""

import math

import numpy as np

from dataio.dataset import Dataset
from numcore.rng import Rng
from utils.errors import CapacityError, ParameterError


def corner_bits(k, d):
    """(k, d) 0/1 matrix; row c repeats the binary code of c across coordinates"""
    bits = max(1, math.ceil(math.log2(k))) if k > 1 else 1
    coords = np.arange(d) % bits
    return ((np.arange(k)[:, None] >> coords[None, :]) & 1).astype(np.float64)


def synth_corners(k, d, gap, n_per_class, seed=0):
    """Classes centered on distinct corners of [0, 1]^d

    Each sample is its corner plus uniform noise of l_inf radius (1 - gap) / 2,
    clipped to [0, 1], so differently labelled samples are >= gap apart.

    Raises:
        CapacityError: k > 2**d
    """
    if k < 1 or d < 1 or n_per_class < 1:
        raise ParameterError(f"Need k, d, n_per_class >= 1, got {k}, {d}, {n_per_class}")
    if k > 2 ** d:
        raise CapacityError(f"{k} classes do not fit on the corners of a {d}-cube")
    if not 0.0 < gap < 1.0:
        raise ParameterError(f"gap must lie in (0, 1), got {gap}")

    corners = corner_bits(k, d)
    labels = np.repeat(np.arange(k), n_per_class)
    radius = (1.0 - gap) / 2.0
    noise = Rng(seed).uniform_array((labels.size, d), -radius, radius)
    features = np.clip(corners[labels] + noise, 0.0, 1.0)
    return Dataset(features, labels, k, name=f"corners(k={k},d={d},gap={gap})")

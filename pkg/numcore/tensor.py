"""Dense float64 tensor helpers

Tensors are plain C-ordered ``numpy.float64`` arrays: element (i, j) of an
(R, C) tensor lives at flat offset i*C + j.
"""

import numpy as np

from utils.errors import NumericError, ShapeError


def as_tensor(data, shape=None, name="tensor"):
    """Convert data to a row-major float64 array, optionally checking its shape

    Args:
        data: Array-like input
        shape (tuple): Expected shape, or None to accept any
        name (str): Used in error messages

    Returns:
        numpy.ndarray: C-contiguous float64 array
    """
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if shape is not None and arr.shape != tuple(shape):
        raise ShapeError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr


def flat_offset(shape, index):
    """Row-major offset of a multi-index"""
    if len(shape) != len(index):
        raise ShapeError(f"Index {index} does not match rank of shape {shape}")
    offset = 0
    for extent, i in zip(shape, index):
        if not 0 <= i < extent:
            raise ShapeError(f"Index {index} out of bounds for shape {shape}")
        offset = offset * extent + i
    return offset


def check_finite(arr, name="tensor"):
    """Raise NumericError naming the first non-finite element"""
    arr = np.asarray(arr)
    finite = np.isfinite(arr)
    if not finite.all():
        bad = np.unravel_index(int(np.argmin(finite.ravel())), arr.shape) if arr.ndim else ()
        raise NumericError(f"{name} has a non-finite value at {tuple(int(i) for i in bad)}",
                           location=(name, tuple(int(i) for i in bad)))
    return arr


def check_same_shape(a, b, name_a="a", name_b="b"):
    """Raise ShapeError unless a and b have identical shapes"""
    if np.shape(a) != np.shape(b):
        raise ShapeError(f"{name_a} shape {np.shape(a)} does not match {name_b} shape {np.shape(b)}")


def as_batch(x, width=None, name="input"):
    """View a vector or matrix as an (n, d) batch

    Returns:
        tuple: (batch array, True if the input was a single vector)
    """
    arr = as_tensor(x, name=name)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be a vector or a matrix, got rank {arr.ndim}")
    if width is not None and arr.shape[1] != width:
        raise ShapeError(f"{name} width {arr.shape[1]} does not match expected {width}")
    return arr, single

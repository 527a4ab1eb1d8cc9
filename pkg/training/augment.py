"""WAUG augmentation: random crop from a zero-padded image + horizontal flip"""

import numpy as np

from utils.errors import ParameterError, ShapeError


def augment_waug(image, rng, pad, flip):
    """Pad by `pad` on each side, crop a random H x W window, maybe mirror

    Args:
        image (numpy.ndarray): H x W x C image
        rng (Rng): Draw stream; crop offsets are drawn first, then the flip
        pad (int): Zero padding on each side
        flip (bool): Mirror horizontally with probability 0.5

    Returns:
        numpy.ndarray: Augmented H x W x C image
    """
    if pad < 0:
        raise ParameterError(f"Padding must be non-negative, got {pad}")
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ShapeError(f"Expected an H x W x C image, got shape {image.shape}")
    h, w, _ = image.shape
    out = image
    if pad > 0:
        padded = np.pad(image, ((pad, pad), (pad, pad), (0, 0)))
        top = rng.randint(2 * pad + 1)
        left = rng.randint(2 * pad + 1)
        out = padded[top:top + h, left:left + w, :]
    if flip and rng.uniform() < 0.5:
        out = out[:, ::-1, :]
    return np.ascontiguousarray(out)


def augment_batch(x, image_shape, rng, pad, flip):
    """Apply augment_waug to each flattened row of x, in row order"""
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = augment_waug(x[i].reshape(image_shape), rng, pad, flip).ravel()
    return out

"""Margin hinge and scaled cross-entropy losses over class logits"""

import numpy as np
from scipy.special import log_softmax, softmax

from numcore.tensor import as_tensor
from utils.errors import LabelError, ParameterError, ShapeError


def _check_labels(logits, labels):
    if logits.ndim != 2:
        raise ShapeError(f"Logits must be (n, k), got shape {logits.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (logits.shape[0],):
        raise ShapeError(f"Expected {logits.shape[0]} labels, got shape {labels.shape}")
    k = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise LabelError(f"Label outside [0, {k})")
    return labels


def runner_up(logits, labels):
    """Index of the largest non-target logit (lowest index on ties)"""
    masked = logits.copy()
    masked[np.arange(len(labels)), labels] = -np.inf
    return np.argmax(masked, axis=1)


def logit_margins(logits, labels):
    """logit_y - max_{j != y} logit_j for each row"""
    logits = as_tensor(logits)
    labels = _check_labels(logits, labels)
    rows = np.arange(len(labels))
    return logits[rows, labels] - logits[rows, runner_up(logits, labels)]


def hinge_batch(logits, labels, margin):
    """Per-sample hinge losses and their gradient with respect to the logits"""
    if not margin > 0:
        raise ParameterError(f"Hinge margin must be positive, got {margin}")
    logits = as_tensor(logits)
    labels = _check_labels(logits, labels)
    rows = np.arange(len(labels))
    other = runner_up(logits, labels)
    gap = logits[rows, labels] - logits[rows, other]
    losses = np.maximum(0.0, margin - gap)
    active = losses > 0
    grad = np.zeros_like(logits)
    grad[rows[active], labels[active]] = -1.0
    grad[rows[active], other[active]] = 1.0
    return losses, grad


def cross_entropy_batch(logits, labels, scale=1.0):
    """Per-sample -log softmax(s * logits)_y and its gradient"""
    if not scale > 0:
        raise ParameterError(f"Cross-entropy scale must be positive, got {scale}")
    logits = as_tensor(logits)
    labels = _check_labels(logits, labels)
    rows = np.arange(len(labels))
    scaled = scale * logits
    losses = -log_softmax(scaled, axis=1)[rows, labels]
    grad = softmax(scaled, axis=1)
    grad[rows, labels] -= 1.0
    return losses, scale * grad


def hinge_loss(logits, y, margin):
    """max(0, margin - (logit_y - max_{j != y} logit_j))"""
    losses, _ = hinge_batch(np.atleast_2d(logits), [y], margin)
    return float(losses[0])


def cross_entropy_loss(logits, y, s=1.0):
    """-log softmax(s * logits)_y"""
    losses, _ = cross_entropy_batch(np.atleast_2d(logits), [y], s)
    return float(losses[0])

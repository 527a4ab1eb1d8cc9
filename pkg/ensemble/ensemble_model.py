"""Convex combinations of base networks: Fusion and Voting inference"""

import numpy as np
from scipy.special import softmax

from numcore.tensor import as_batch, as_tensor
from training.losses import logit_margins
from utils.errors import ParameterError, ShapeError, UnsupportedModeError
from utils.net_types import ENSEMBLE_MODES
from utils.parallel import parallel_map

FUSION = "fusion"
VOTING = "voting"

# Tolerance on sum(weights) == 1
WEIGHT_SUM_TOLERANCE = 1e-9


class EnsembleModel:
    """Weighted ensemble G(x) = sum_i w_i g_i(x)

    Fusion averages base logits; Voting averages base softmax outputs.
    Weights must be a convex combination and are checked once, here.
    """

    def __init__(self, bases, weights=None, mode=FUSION, threads=1):
        bases = list(bases)
        if not bases:
            raise ParameterError("Ensemble needs at least one base network")
        if mode not in ENSEMBLE_MODES:
            raise ParameterError(f"Unknown ensemble mode: {mode}")
        first = bases[0]
        for idx, base in enumerate(bases[1:], start=1):
            if base.in_width != first.in_width or base.num_classes != first.num_classes:
                raise ShapeError(f"Base {idx} maps {base.in_width} -> {base.num_classes}, "
                                 f"base 0 maps {first.in_width} -> {first.num_classes}")

        if weights is None:
            weights = np.full(len(bases), 1.0 / len(bases))
        weights = as_tensor(weights, shape=(len(bases),), name="ensemble weights")
        if np.any(weights < 0):
            raise ParameterError(f"Ensemble weights must be non-negative, got {weights.tolist()}")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ParameterError(f"Ensemble weights must sum to 1, got {weights.sum():.12g}")

        self.bases = bases
        self.weights = weights
        self.mode = mode
        self.threads = threads

    @property
    def m(self):
        return len(self.bases)

    @property
    def in_width(self):
        return self.bases[0].in_width

    @property
    def num_classes(self):
        return self.bases[0].num_classes

    @property
    def is_exact(self):
        return all(base.is_exact for base in self.bases)

    @property
    def outputs_probabilities(self):
        """Voting outputs a probability vector instead of logits"""
        return self.mode == VOTING

    def exact_view(self):
        return EnsembleModel([b.exact_view() for b in self.bases], self.weights.copy(),
                             self.mode, self.threads)

    def _base_outputs(self, x):
        outputs = parallel_map(lambda base: base.forward(x), self.bases, self.threads)
        if self.mode == VOTING:
            outputs = [softmax(o, axis=1) for o in outputs]
        return outputs

    def forward(self, x):
        """Batch output: fused logits or averaged probabilities"""
        total = np.zeros((x.shape[0], self.num_classes))
        # Fixed-order weighted reduction
        for w, out in zip(self.weights, self._base_outputs(x)):
            total += w * out
        return total

    def input_gradient(self, x, upstream):
        """Gradient of <upstream, forward(x)> with respect to x"""
        def base_grad(pair):
            w, base = pair
            if self.mode == FUSION:
                return base.input_gradient(x, w * upstream)
            s = softmax(base.forward(x), axis=1)
            u = w * upstream
            # Softmax Jacobian-vector product: s * (u - <u, s>)
            return base.input_gradient(x, s * (u - (u * s).sum(axis=1, keepdims=True)))

        grads = parallel_map(base_grad, list(zip(self.weights, self.bases)), self.threads)
        total = np.zeros_like(x)
        for g in grads:
            total += g
        return total

    def predict(self, x):
        return np.argmax(self.forward(x), axis=1)

    def describe(self):
        return f"{self.mode} ensemble of {self.m}: {self.bases[0].describe()}"


def _require_mode(ensemble, mode, operation):
    if ensemble.mode != mode:
        raise UnsupportedModeError(f"{operation} needs a {mode} ensemble, got {ensemble.mode}")


def fusion_forward(ensemble, x):
    """sum_i w_i * g_i(x) for a single input (or a batch)"""
    _require_mode(ensemble, FUSION, "fusion_forward")
    batch, single = as_batch(x, ensemble.in_width)
    out = ensemble.forward(batch)
    return out[0] if single else out


def voting_forward(ensemble, x):
    """sum_i w_i * softmax(g_i(x)); each row sums to 1"""
    _require_mode(ensemble, VOTING, "voting_forward")
    batch, single = as_batch(x, ensemble.in_width)
    out = ensemble.forward(batch)
    return out[0] if single else out


def ensemble_margin(ensemble, x, y):
    """Fusion logit_y minus the largest other fusion logit"""
    _require_mode(ensemble, FUSION, "ensemble_margin")
    batch, single = as_batch(x, ensemble.in_width)
    labels = np.atleast_1d(np.asarray(y, dtype=np.int64))
    margins = logit_margins(ensemble.forward(batch), labels)
    return float(margins[0]) if single else margins


def weighted_vote(ensemble, x):
    """Class with the largest total weight among base argmax votes

    This is the decision rule certify_voting certifies; it can differ from
    the argmax of voting_forward.
    """
    batch, single = as_batch(x, ensemble.in_width)
    tally = np.zeros((batch.shape[0], ensemble.num_classes))
    rows = np.arange(batch.shape[0])
    for w, base in zip(ensemble.weights, ensemble.bases):
        tally[rows, base.predict(batch)] += w
    votes = np.argmax(tally, axis=1)
    return int(votes[0]) if single else votes

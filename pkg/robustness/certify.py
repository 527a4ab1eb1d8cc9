"""Sound l_inf certification for Exact-mode networks and Fusion ensembles

Every distance layer of an Exact network is 1-Lipschitz per output
coordinate, so a perturbation of size r moves each backbone output by at most
r. Headless models are certified by their logit margin; models with an
affine head by propagating the [o - r, o + r] box through the head.
"""

import numpy as np

from ensemble.ensemble_model import VOTING, EnsembleModel
from numcore.tensor import as_batch
from robustness.attack import pgd_batch
from training.losses import logit_margins
from utils.errors import CertificationRefusedError, ParameterError, UnsupportedModeError
from utils.parallel import map_chunks

# Bisection steps for the radius of head networks
RADIUS_BISECTION_STEPS = 30
# Largest radius the head bisection will report
RADIUS_SEARCH_CAP = 4.0


def weighted_bases(model):
    """[(weight, network)] for a network or an ensemble"""
    if isinstance(model, EnsembleModel):
        return list(zip(model.weights, model.bases))
    return [(1.0, model)]


def check_certifiable(model, allow_voting=False):
    """Refuse models containing surrogate layers (and Voting ensembles)"""
    if isinstance(model, EnsembleModel) and model.mode == VOTING and not allow_voting:
        raise UnsupportedModeError("Voting ensembles are certified with certify_voting only")
    for base_idx, (_, net) in enumerate(weighted_bases(model)):
        idx = net.first_surrogate_layer()
        if idx is not None:
            where = f"base {base_idx}, " if isinstance(model, EnsembleModel) else ""
            raise CertificationRefusedError(
                f"Cannot certify: {where}layer {idx} runs in surrogate mode "
                f"'{net.dist_layers[idx].mode.describe()}'", layer_index=idx)


def has_head(model):
    return any(net.head is not None for _, net in weighted_bases(model))


def _margin_bounds(model, X, Y, r):
    """Lower bounds on G_y - G_j over the r-ball, shape (n, k); +inf at j = y

    r may be a scalar or one radius per row.
    """
    r = np.broadcast_to(np.asarray(r, dtype=np.float64), (len(X),))[:, None]
    rows = np.arange(len(Y))
    total = np.zeros((len(X), model.num_classes))
    for w, net in weighted_bases(model):
        o = net.backbone_forward(X)
        lower, upper = o - r, o + r
        if net.head is not None:
            lower, upper = net.head.propagate_interval(lower, upper)
        total += w * (lower[rows, Y][:, None] - upper)
    total[rows, Y] = np.inf
    return total


def certify_batch(model, X, Y, r, threads=1):
    """Mask of rows certified at radius r by interval propagation"""
    check_certifiable(model)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.int64)
    r = np.broadcast_to(np.asarray(r, dtype=np.float64), (len(X),))
    if np.any(r < 0):
        raise ParameterError("Certification radius must be >= 0")
    return map_chunks(lambda x, y, rr: _margin_bounds(model, x, y, rr).min(axis=1) > 0,
                      [X, Y, np.ascontiguousarray(r)], threads)


def certify_with_head(net, x, y, r):
    """True iff lower(logit_y) > max_{j != y} upper(logit_j) over the r-ball"""
    batch, _ = as_batch(x, net.in_width)
    return bool(certify_batch(net, batch, np.array([y]), r)[0])


def _head_radii(model, X, Y):
    """Largest certified radius found by bisection (a sound lower bound)"""
    lo = np.zeros(len(X))
    certified = _margin_bounds(model, X, Y, 0.0).min(axis=1) > 0
    hi = np.where(certified, 1.0, 0.0)
    # Grow the bracket until it fails or hits the cap
    while True:
        grow = certified & (hi < RADIUS_SEARCH_CAP) & (_margin_bounds(model, X, Y, hi).min(axis=1) > 0)
        if not np.any(grow):
            break
        lo = np.where(grow, hi, lo)
        hi = np.where(grow, hi * 2.0, hi)
    for _ in range(RADIUS_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        ok = certified & (_margin_bounds(model, X, Y, mid).min(axis=1) > 0)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return np.where(certified, lo, 0.0)


def certified_radii(model, X, Y, threads=1):
    """Per-row certified radius; 0 for misclassified rows

    Headless models (and Fusion ensembles of them) give margin / 2. Models
    with a head give the bisection radius of interval propagation.
    """
    check_certifiable(model)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.int64)
    if has_head(model):
        return map_chunks(lambda x, y: _head_radii(model, x, y), [X, Y], threads)
    margins = map_chunks(lambda x, y: logit_margins(model.forward(x), y), [X, Y], threads)
    return np.maximum(margins, 0.0) / 2.0


def certified_radius(model, x, y):
    """Certified l_inf radius of one sample"""
    batch, _ = as_batch(x, model.in_width)
    return float(certified_radii(model, batch, np.array([y]))[0])


def certify_voting(ensemble, X, Y, r, threads=1):
    """Voting certification: bases holding more than half the weight each certify at r"""
    if not isinstance(ensemble, EnsembleModel):
        raise UnsupportedModeError("certify_voting needs an ensemble")
    check_certifiable(ensemble, allow_voting=True)
    votes = np.zeros(len(X))
    for w, net in weighted_bases(ensemble):
        votes += w * certify_batch(net, X, Y, r, threads)
    return votes > 0.5


def certified_flags(model, X, Y, r, threads=1):
    """Certified-at-r mask using the path that fits the model"""
    if isinstance(model, EnsembleModel) and model.mode == VOTING:
        return certify_voting(model, X, Y, r, threads)
    return certify_batch(model, X, Y, r, threads)


def accuracy_summary(model, X, Y, epsilon, attack=None, threads=1):
    """Clean, certified and (with an attack config) robust accuracy

    Returns:
        dict: ``clean``, ``certified`` and ``robust`` fractions; ``robust`` is
        None without an attack, ``certified`` is None for Voting ensembles
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.int64)
    clean = map_chunks(lambda x, y: model.predict(x) == y, [X, Y], threads)
    certified = None
    if not (isinstance(model, EnsembleModel) and model.mode == VOTING):
        certified = float(np.mean(certified_flags(model, X, Y, epsilon, threads) & clean))
    robust = None
    if attack is not None:
        success, _ = pgd_batch(model, X, Y, attack, threads)
        robust = float(np.mean(clean & ~success))
    return {"clean": float(np.mean(clean)), "certified": certified, "robust": robust}


def sample_margins(model, X, Y, threads=1):
    """Signed half-margins (logit_y - max_{j != y} logit_j) / 2

    For two classes this is the binary y * G(x) with G = (logit_+ - logit_-) / 2.
    """
    check_certifiable(model)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.int64)
    return map_chunks(lambda x, y: logit_margins(model.forward(x), y), [X, Y], threads) / 2.0


def radius_matrix(bases, X, Y, threads=1):
    """n x m matrix of base certified radii clamped to [0, 1]"""
    columns = [certified_radii(net, X, Y, threads) for net in bases]
    return np.clip(np.stack(columns, axis=1), 0.0, 1.0)
